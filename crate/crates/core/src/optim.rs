//! Population-based minimizers over a box: differential evolution, particle
//! swarm and a real-coded genetic algorithm.
//!
//! Every random draw comes from a generator keyed by `(seed, generation,
//! member)`, so evaluating a generation in parallel gives exactly the serial
//! result. Non-finite objective values are treated as `+inf`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Algorithm {
    Pso,
    De,
    Ga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pso, Algorithm::De, Algorithm::Ga];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Pso => "PSO",
            Algorithm::De => "DE",
            Algorithm::Ga => "GA",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParams(format!("unknown algorithm '{s}' (expected PSO, DE or GA)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension {
                context: "bounds".into(),
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(u > l) || !l.is_finite() || !u.is_finite() {
                return Err(Error::Domain(format!(
                    "bounds have zero volume in dimension {j}: [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn range(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    fn clip(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.lower[j] + rng.gen::<f64>() * self.range(j))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub population: usize,
    /// Generations including the initial population.
    pub generations: usize,
    pub seed: u64,
    /// Worker threads for objective evaluation; 0 evaluates serially.
    pub threads: usize,
}

impl OptimConfig {
    /// Population and generation count that fit an evaluation budget.
    pub fn from_budget(population: usize, budget: usize, seed: u64) -> Result<Self> {
        if population == 0 || budget < population {
            return Err(Error::InvalidParams(format!(
                "budget {budget} must be at least the population size {population}"
            )));
        }
        Ok(Self {
            population,
            generations: budget / population,
            seed,
            threads: 0,
        })
    }

    pub fn budget(&self) -> usize {
        self.population * self.generations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Best-so-far objective after each generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

const DE_F: f64 = 0.7;
const DE_CR: f64 = 0.9;
const PSO_INERTIA: f64 = 0.72;
const PSO_COGNITIVE: f64 = 1.49;
const PSO_SOCIAL: f64 = 1.49;
const GA_BLEND_ALPHA: f64 = 0.5;
const GA_CROSSOVER_RATE: f64 = 0.9;
const GA_MUTATION_SIGMA: f64 = 0.1;
const GA_ELITES: usize = 2;

fn member_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

struct Evaluator<'a, F> {
    f: &'a F,
    pool: Option<rayon::ThreadPool>,
    count: usize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Evaluator<'_, F> {
    fn eval(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        self.count += points.len();
        let f = self.f;
        let clean = |x: &Vec<f64>| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        match &self.pool {
            Some(pool) => pool.install(|| points.par_iter().map(clean).collect()),
            None => points.iter().map(clean).collect(),
        }
    }
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < values[best] { i } else { best })
}

/// Minimizes `f` over `bounds`.
pub fn optimize<F>(algorithm: Algorithm, f: &F, bounds: &Bounds, cfg: &OptimConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let min_pop = if algorithm == Algorithm::De { 4 } else { 2 };
    if cfg.population < min_pop {
        return Err(Error::InvalidParams(format!(
            "{algorithm} needs a population of at least {min_pop}"
        )));
    }
    if cfg.generations == 0 {
        return Err(Error::InvalidParams("at least one generation is required".into()));
    }
    let pool = if cfg.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut ev = Evaluator { f, pool, count: 0 };
    let (best, value, trace) = match algorithm {
        Algorithm::De => differential_evolution(&mut ev, bounds, cfg),
        Algorithm::Pso => particle_swarm(&mut ev, bounds, cfg),
        Algorithm::Ga => genetic(&mut ev, bounds, cfg),
    };
    Ok(OptimResult {
        best,
        value,
        trace,
        evaluations: ev.count,
    })
}

fn initial_population(bounds: &Bounds, cfg: &OptimConfig) -> Vec<Vec<f64>> {
    (0..cfg.population)
        .map(|i| bounds.sample(&mut member_rng(cfg.seed, 0, i)))
        .collect()
}

type Outcome = (Vec<f64>, f64, Vec<f64>);

fn differential_evolution<F: Fn(&[f64]) -> f64 + Sync>(
    ev: &mut Evaluator<'_, F>,
    bounds: &Bounds,
    cfg: &OptimConfig,
) -> Outcome {
    let np = cfg.population;
    let dim = bounds.dim();
    let mut pop = initial_population(bounds, cfg);
    let mut fit = ev.eval(&pop);
    let mut trace = vec![fit[argmin(&fit)]];
    for gen in 1..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut rng = member_rng(cfg.seed, gen, i);
                let mut pick = |taken: &[usize]| loop {
                    let r = rng.gen_range(0..np);
                    if r != i && !taken.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&[]);
                let r2 = pick(&[r1]);
                let r3 = pick(&[r1, r2]);
                let jrand = rng.gen_range(0..dim);
                let mut trial = pop[i].clone();
                for j in 0..dim {
                    if j == jrand || rng.gen::<f64>() < DE_CR {
                        trial[j] = pop[r1][j] + DE_F * (pop[r2][j] - pop[r3][j]);
                    }
                }
                bounds.clip(&mut trial);
                trial
            })
            .collect();
        let tf = ev.eval(&trials);
        for (i, (trial, v)) in trials.into_iter().zip(tf).enumerate() {
            if v <= fit[i] {
                pop[i] = trial;
                fit[i] = v;
            }
        }
        trace.push(fit[argmin(&fit)].min(trace[trace.len() - 1]));
    }
    let b = argmin(&fit);
    (pop[b].clone(), fit[b], trace)
}

fn particle_swarm<F: Fn(&[f64]) -> f64 + Sync>(
    ev: &mut Evaluator<'_, F>,
    bounds: &Bounds,
    cfg: &OptimConfig,
) -> Outcome {
    let dim = bounds.dim();
    let vmax: Vec<f64> = (0..dim).map(|j| 0.5 * bounds.range(j)).collect();
    let mut pos = initial_population(bounds, cfg);
    let mut vel: Vec<Vec<f64>> = (0..cfg.population)
        .map(|i| {
            // a separate stream from the positions drawn for generation 0
            let mut rng = member_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, 0, i);
            (0..dim).map(|j| rng.gen_range(-vmax[j]..vmax[j]) * 0.1).collect()
        })
        .collect();
    let fit = ev.eval(&pos);
    let mut pbest = pos.clone();
    let mut pfit = fit;
    let mut g = argmin(&pfit);
    let mut gbest = pbest[g].clone();
    let mut gfit = pfit[g];
    let mut trace = vec![gfit];
    for gen in 1..cfg.generations {
        for i in 0..cfg.population {
            let mut rng = member_rng(cfg.seed, gen, i);
            for j in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = PSO_INERTIA * vel[i][j]
                    + PSO_COGNITIVE * r1 * (pbest[i][j] - pos[i][j])
                    + PSO_SOCIAL * r2 * (gbest[j] - pos[i][j]);
                vel[i][j] = v.clamp(-vmax[j], vmax[j]);
                pos[i][j] += vel[i][j];
            }
            bounds.clip(&mut pos[i]);
        }
        let fit = ev.eval(&pos);
        for i in 0..cfg.population {
            if fit[i] < pfit[i] {
                pfit[i] = fit[i];
                pbest[i] = pos[i].clone();
            }
        }
        g = argmin(&pfit);
        if pfit[g] < gfit {
            gfit = pfit[g];
            gbest = pbest[g].clone();
        }
        trace.push(gfit);
    }
    (gbest, gfit, trace)
}

fn genetic<F: Fn(&[f64]) -> f64 + Sync>(
    ev: &mut Evaluator<'_, F>,
    bounds: &Bounds,
    cfg: &OptimConfig,
) -> Outcome {
    let np = cfg.population;
    let dim = bounds.dim();
    let elites = GA_ELITES.min(np - 1);
    let mutation_rate = 1.0 / dim as f64;
    let mut pop = initial_population(bounds, cfg);
    let mut fit = ev.eval(&pop);
    let mut trace = vec![fit[argmin(&fit)]];
    for gen in 1..cfg.generations {
        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        let children: Vec<Vec<f64>> = (elites..np)
            .map(|i| {
                let mut rng = member_rng(cfg.seed, gen, i);
                let tournament = |rng: &mut ChaCha8Rng| {
                    let a = rng.gen_range(0..np);
                    let b = rng.gen_range(0..np);
                    if fit[b] < fit[a] {
                        b
                    } else {
                        a
                    }
                };
                let pa = tournament(&mut rng);
                let pb = tournament(&mut rng);
                let mut child = pop[pa].clone();
                if rng.gen::<f64>() < GA_CROSSOVER_RATE {
                    for j in 0..dim {
                        let lo = pop[pa][j].min(pop[pb][j]);
                        let hi = pop[pa][j].max(pop[pb][j]);
                        let d = hi - lo;
                        let u: f64 = rng.gen();
                        child[j] = lo - GA_BLEND_ALPHA * d + u * (1.0 + 2.0 * GA_BLEND_ALPHA) * d;
                    }
                }
                for j in 0..dim {
                    if rng.gen::<f64>() < mutation_rate {
                        let n = Normal::new(0.0, GA_MUTATION_SIGMA * bounds.range(j)).expect("finite sigma");
                        child[j] += n.sample(&mut rng);
                    }
                }
                bounds.clip(&mut child);
                child
            })
            .collect();
        let cf = ev.eval(&children);
        let mut next: Vec<Vec<f64>> = order[..elites].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..elites].iter().map(|&i| fit[i]).collect();
        next.extend(children);
        next_fit.extend(cf);
        pop = next;
        fit = next_fit;
        trace.push(fit[argmin(&fit)].min(trace[trace.len() - 1]));
    }
    let b = argmin(&fit);
    (pop[b].clone(), fit[b], trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(center: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| x.iter().map(|v| (v - center) * (v - center)).sum()
    }

    #[test]
    fn de_solves_sphere() {
        let b = Bounds::unit(3).unwrap();
        for center in [0.0, 0.37] {
            let cfg = OptimConfig::from_budget(30, 3000, 11).unwrap();
            let r = optimize(Algorithm::De, &sphere(center), &b, &cfg).unwrap();
            assert!(r.value <= 1e-6, "center {center}: {}", r.value);
            assert_eq!(r.evaluations, 3000);
            assert_eq!(r.trace.len(), 100);
        }
    }

    #[test]
    fn pso_and_ga_make_progress_on_sphere() {
        let b = Bounds::unit(3).unwrap();
        let cfg = OptimConfig::from_budget(30, 3000, 5).unwrap();
        for alg in [Algorithm::Pso, Algorithm::Ga] {
            let r = optimize(alg, &sphere(0.37), &b, &cfg).unwrap();
            assert!(r.value <= 1e-4, "{alg}: {}", r.value);
        }
    }

    #[test]
    fn traces_never_increase_and_repeat_per_seed() {
        let b = Bounds::new(vec![-2.0, -1.0], vec![2.0, 3.0]).unwrap();
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        for alg in Algorithm::ALL {
            let cfg = OptimConfig::from_budget(20, 600, 3).unwrap();
            let a = optimize(alg, &rosen, &b, &cfg).unwrap();
            let again = optimize(alg, &rosen, &b, &cfg).unwrap();
            assert_eq!(a, again);
            assert!(a.trace.windows(2).all(|w| w[1] <= w[0]), "{alg}");
            let par = optimize(alg, &rosen, &b, &OptimConfig { threads: 2, ..cfg }).unwrap();
            assert_eq!(a, par);
        }
    }

    #[test]
    fn nan_counts_as_infinity() {
        let b = Bounds::unit(2).unwrap();
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] + x[1] };
        let cfg = OptimConfig::from_budget(10, 200, 1).unwrap();
        for alg in Algorithm::ALL {
            let r = optimize(alg, &f, &b, &cfg).unwrap();
            assert!(r.value.is_finite() && r.best[0] <= 0.5);
        }
    }

    #[test]
    fn degenerate_bounds_are_rejected() {
        assert!(matches!(Bounds::new(vec![0.0, 1.0], vec![1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn parse_algorithm() {
        assert_eq!("pso".parse::<Algorithm>().unwrap(), Algorithm::Pso);
        assert!("sa".parse::<Algorithm>().is_err());
    }
}
