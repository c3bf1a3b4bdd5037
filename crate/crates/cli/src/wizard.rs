//! Scripted or interactive five-question dialog that assembles a design
//! spec. Answers go through the same builder as spec files.

use std::io::{BufRead, Write};

use modkit_core::converter::ModulationStrategy;
use modkit_core::design::Objective;
use modkit_core::optim::Algorithm;
use modkit_core::sim::OperatingConditions;

use crate::error::{CliError, CliResult, ErrorKind};
use crate::spec::{ParsedSpec, SpecFile};

/// Consecutive invalid answers tolerated per question.
pub const MAX_ATTEMPTS: usize = 3;

const STRATEGY_OPTIONS: &str = "SPS, DPS, EPS1, EPS2, TPS, HYBRID";
const OBJECTIVE_OPTIONS: &str = "current stress, conduction loss (efficiency), ZVS count (soft switching)";
const CONDITION_FORMAT: &str = "five numbers: P_r V_1r V_2r P_a V_2a (W, V, V, W, V)";
const ALGORITHM_OPTIONS: &str = "PSO, DE, GA";
const CONFIRM_OPTIONS: &str = "yes, no";

struct Dialog<'a, R, W> {
    input: &'a mut R,
    output: &'a mut W,
}

impl<R: BufRead, W: Write> Dialog<'_, R, W> {
    fn say(&mut self, text: &str) -> CliResult<()> {
        writeln!(self.output, "{text}")?;
        Ok(())
    }

    fn read_answer(&mut self) -> CliResult<String> {
        self.output.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Err(CliError::new(ErrorKind::Aborted, "input closed before the dialog finished"));
        }
        Ok(line.trim().to_string())
    }

    /// Asks until `parse` accepts, re-prompting with the option list.
    fn ask<T>(
        &mut self,
        stage: &str,
        question: &str,
        options: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> CliResult<T> {
        self.say(&format!("{question} [{options}]"))?;
        for attempt in 1..=MAX_ATTEMPTS {
            let answer = self.read_answer()?;
            match parse(&answer) {
                Ok(v) => return Ok(v),
                Err(why) if attempt < MAX_ATTEMPTS => {
                    self.say(&format!("{why}. Valid options: {options}"))?;
                }
                Err(why) => {
                    return Err(CliError::new(
                        ErrorKind::Aborted,
                        format!("{MAX_ATTEMPTS} invalid answers to the {stage} question (last: {why})"),
                    ))
                }
            }
        }
        unreachable!()
    }
}

fn parse_conditions(answer: &str) -> Result<OperatingConditions, String> {
    let values: Vec<f64> = answer
        .split(|c: char| c.is_whitespace() || c == ',' || c == '/')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.trim_end_matches(['W', 'w', 'V', 'v']);
            t.parse::<f64>().map_err(|_| format!("'{t}' is not a number"))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != 5 {
        return Err(format!("expected 5 numbers, got {}", values.len()));
    }
    let c = OperatingConditions {
        rated_power: values[0],
        rated_input_voltage: values[1],
        rated_output_voltage: values[2],
        actual_power: values[3],
        actual_output_voltage: values[4],
    };
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn parse_confirm(answer: &str) -> Result<bool, String> {
    match answer.to_ascii_lowercase().as_str() {
        "y" | "yes" => Ok(true),
        "n" | "no" => Ok(false),
        _ => Err(format!("'{answer}' is neither yes nor no")),
    }
}

/// Runs the dialog and returns the equivalent spec document.
pub fn wizard_file<R: BufRead, W: Write>(input: &mut R, output: &mut W) -> CliResult<SpecFile> {
    let mut d = Dialog { input, output };
    let strategy: ModulationStrategy = d.ask(
        "strategy",
        "Which modulation strategy should be optimized?",
        STRATEGY_OPTIONS,
        |a| a.parse().map_err(|_| format!("unknown strategy '{a}'")),
    )?;
    let objective: Objective = d.ask(
        "objective",
        "Which performance metric has priority?",
        OBJECTIVE_OPTIONS,
        |a| a.parse().map_err(|_| format!("unknown objective '{a}'")),
    )?;
    let conditions = d.ask(
        "conditions",
        "What are the operating conditions?",
        CONDITION_FORMAT,
        parse_conditions,
    )?;
    let algorithm: Algorithm = d.ask(
        "algorithm",
        "Which optimization algorithm?",
        ALGORITHM_OPTIONS,
        |a| a.parse().map_err(|_| format!("unknown algorithm '{a}'")),
    )?;
    let file = SpecFile {
        strategy: strategy.as_str().to_string(),
        objective: objective.as_str().to_string(),
        conditions,
        algorithm: algorithm.as_str().to_string(),
        backend: None,
        circuit: None,
        seed: None,
        budget: None,
        population: None,
        penalty_factor: None,
        report: None,
    };
    let summary = format!(
        "Collected: {strategy}, {objective}, P_r={} W, V_1r={} V, V_2r={} V, P_a={} W, V_2a={} V, {algorithm}. Proceed?",
        conditions.rated_power,
        conditions.rated_input_voltage,
        conditions.rated_output_voltage,
        conditions.actual_power,
        conditions.actual_output_voltage,
    );
    if !d.ask("confirmation", &summary, CONFIRM_OPTIONS, parse_confirm)? {
        return Err(CliError::new(ErrorKind::Aborted, "design declined at confirmation"));
    }
    Ok(file)
}

pub fn wizard<R: BufRead, W: Write>(input: &mut R, output: &mut W) -> CliResult<ParsedSpec> {
    wizard_file(input, output)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(script: &str) -> (CliResult<ParsedSpec>, String) {
        let mut input = script.as_bytes();
        let mut out = Vec::new();
        let r = wizard(&mut input, &mut out);
        (r, String::from_utf8(out).unwrap())
    }

    #[test]
    fn reference_case_transcript() {
        let (r, out) = run("TPS\nCurrent stress\n1000 200 200 600 160\nPSO\nyes\n");
        let p = r.unwrap();
        assert_eq!(p.design.strategy, ModulationStrategy::Tps);
        assert_eq!(p.design.objective, Objective::CurrentStress);
        assert_eq!(p.design.conditions.actual_output_voltage, 160.0);
        assert_eq!(out.lines().count(), 5);
    }

    #[test]
    fn invalid_strategy_reprompts_with_options() {
        let (r, out) = run("XYZ\ntps\nstress\n1000W 200V 200V 600W 160V\nga\ny\n");
        assert!(r.is_ok());
        assert!(out.contains("SPS, DPS, EPS1, EPS2, TPS, HYBRID"));
        assert!(out.lines().nth(1).unwrap().contains("unknown strategy 'XYZ'"));
    }

    #[test]
    fn three_strikes_and_eof_abort() {
        let (r, _) = run("a\nb\nc\nTPS\n");
        assert_eq!(r.unwrap_err().kind, ErrorKind::Aborted);
        let (r, _) = run("TPS\nstress\n");
        assert_eq!(r.unwrap_err().kind, ErrorKind::Aborted);
        let (r, _) = run("TPS\nstress\n1000 200 200 600 160\nPSO\nno\n");
        assert_eq!(r.unwrap_err().kind, ErrorKind::Aborted);
    }

    #[test]
    fn counter_resets_after_a_valid_answer() {
        let (r, _) = run("x\ny\nTPS\nq\nr\nstress\n1000 200 200 600 160\nPSO\nyes\n");
        assert!(r.is_ok());
    }

    #[test]
    fn over_rated_power_is_rejected_and_reprompted() {
        let (r, out) = run("TPS\nstress\n1000 200 200 1200 160\n1000 200 200 600 160\nPSO\nyes\n");
        assert!(r.is_ok());
        assert!(out.contains("P_a <= P_r"), "{out}");
    }
}
