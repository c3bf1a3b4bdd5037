//! All-or-nothing output directories: artifacts are written into a hidden
//! staging directory next to the target and renamed into place on success.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult, ErrorKind};

fn staging_path(out: &Path) -> CliResult<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| CliError::new(ErrorKind::Usage, format!("--out {} has no final component", out.display())))?;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok(parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id())))
}

/// Existing non-empty directories are never overwritten.
pub fn check_target(out: &Path) -> CliResult<()> {
    if out.exists() {
        let empty = out.is_dir() && fs::read_dir(out)?.next().is_none();
        if !empty {
            return Err(CliError::new(
                ErrorKind::Io,
                format!("output {} already exists and is not an empty directory", out.display()),
            ));
        }
    }
    Ok(())
}

/// Runs `fill` against a staging directory and moves it to `out` only if
/// it succeeds. On failure nothing is left behind.
pub fn write_atomically<T>(out: &Path, fill: impl FnOnce(&Path) -> CliResult<T>) -> CliResult<T> {
    check_target(out)?;
    let staging = staging_path(out)?;
    if let Some(parent) = staging.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", parent.display())))?;
    }
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", staging.display())))?;
    let result = fill(&staging).and_then(|v| {
        if out.exists() {
            fs::remove_dir(out)?;
        }
        fs::rename(&staging, out).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", out.display())))?;
        Ok(v)
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("bundle");
        let r: CliResult<()> = write_atomically(&out, |dir| {
            fs::write(dir.join("a.csv"), "x\n")?;
            Err(CliError::new(ErrorKind::Design, "boom"))
        });
        assert!(r.is_err());
        assert!(!out.exists());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn success_moves_into_place_and_refuses_overwrite() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("nested").join("bundle");
        write_atomically(&out, |dir| Ok(fs::write(dir.join("a.csv"), "x\n")?)).unwrap();
        assert_eq!(fs::read_to_string(out.join("a.csv")).unwrap(), "x\n");
        let e = write_atomically(&out, |_| Ok(())).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Io);
        let empty = root.path().join("empty");
        fs::create_dir(&empty).unwrap();
        write_atomically(&empty, |dir| Ok(fs::write(dir.join("b"), "")?)).unwrap();
        assert!(empty.join("b").exists());
    }
}
