//! The round loop: build the version space, recommend over the optimistic
//! set, map into the pessimistic set, play, observe, update.

use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, MappingKind, RunMode};
use crate::environment::{loss_value, ConstraintSpec, EnvironmentSpec, Link, LossAdversary};
use crate::hindsight::hindsight_best_safe;
use crate::learning::{sample_index, OgdConfig, OgdState, SleepingHedge};
use crate::linalg::{dot, scaled};
use crate::mapping::{explore_exploit_map, kappa_grid, saddle_map_finite, Exp3};
use crate::regression::{FiniteForecaster, GlmForecaster, VawForecaster};
use crate::types::{
    dyadic_grid, Action, DistributionSummary, MappingId, RegretLedger, RoundRecord,
};
use crate::version_space::{
    ConstraintEnvelope, ContinuousVersionSpace, EllipsoidVersionSpace, FiniteVersionSpace,
    GlmVersionSpace, PredictionStats, ProductVersionSpace,
};
use crate::{Error, Result};

const NOISE_STREAM: u64 = 0;
const LOSS_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;
/// Grid size for the link slope bounds.
const SLOPE_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub ledger: RegretLedger,
}

#[derive(Debug, Clone, Copy)]
pub enum SetsView<'a> {
    Continuous(&'a ContinuousVersionSpace),
    Finite(&'a FiniteVersionSpace),
}

/// Snapshot handed to observers at the start of each round, after the
/// version space is built and before anything is played.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub t: usize,
    pub sets: SetsView<'a>,
    pub truth_in_version_space: bool,
}

/// Per-round safety with the configured mapping.
pub fn run_safe_learning(config: &ExperimentConfig) -> Result<RunOutput> {
    run_with_observer(config, RunMode::Safe, &mut |_| {})
}

/// Long-term variant: the optimistic recommendation is played unmapped.
pub fn run_long_term(config: &ExperimentConfig) -> Result<RunOutput> {
    run_with_observer(config, RunMode::LongTerm, &mut |_| {})
}

/// Runs in the mode named by `config.mode`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    run_with_observer(config, config.mode, &mut |_| {})
}

pub fn run_with_observer(
    config: &ExperimentConfig,
    mode: RunMode,
    observer: &mut dyn FnMut(&RoundView<'_>),
) -> Result<RunOutput> {
    config.validate()?;
    let raw = if config.environment.constraint.is_finite() {
        FiniteRun::new(config, mode)?.run(observer)?
    } else {
        ContinuousRun::new(config, mode)?.run(observer)?
    };
    finalize(config, raw)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Records plus the loss descriptors the trace schema leaves out.
struct RawRun {
    records: Vec<RoundRecord>,
    ledger: RegretLedger,
    losses: Vec<Vec<f64>>,
}

fn finalize(config: &ExperimentConfig, raw: RawRun) -> Result<RunOutput> {
    let env = &config.environment;
    let RawRun {
        mut records,
        mut ledger,
        losses,
    } = raw;
    let best = hindsight_best_safe(&losses, &env.constraint, env.action_radius)?;
    let mut cum = 0.0;
    for (rec, l) in records.iter_mut().zip(&losses) {
        cum += rec.loss_value - loss_value(l, &best.action);
        rec.cumulative_regret_proxy = cum;
    }
    ledger.hindsight_safe_opt_loss = Some(best.value);
    ledger.hindsight_action = Some(best.action);
    ledger.regret = ledger.learner_cum_loss - best.value;
    for (i, eps) in dyadic_grid() {
        let n = records.iter().filter(|r| r.width_at_action > eps).count();
        ledger.width_exceed_counts.insert(i, n);
    }
    Ok(RunOutput { records, ledger })
}

fn base_ledger(config: &ExperimentConfig, radius: f64) -> RegretLedger {
    RegretLedger {
        loss_scale: config.loss_scale(),
        radius,
        truth_always_covered: true,
        horizon: config.horizon,
        ..RegretLedger::default()
    }
}

fn account(ledger: &mut RegretLedger, rec: &RoundRecord) {
    ledger.learner_cum_loss += rec.loss_value;
    ledger.constraint_sum += rec.constraint_value;
    ledger.violation_magnitude_sum += rec.constraint_value.max(0.0);
    if rec.violated {
        ledger.violations += 1;
    }
    ledger.width_sum += rec.width_at_action;
    ledger.truth_always_covered &= rec.truth_in_version_space;
}

enum ContinuousModel {
    Linear {
        vaw: VawForecaster,
        stats: PredictionStats,
    },
    Glm {
        glm: GlmForecaster,
        /// Unweighted Gram matrix of played actions.
        gram: crate::linalg::Gram,
        stats: PredictionStats,
        link: Link,
        c_lower: f64,
        c_upper: f64,
    },
    Polytopic {
        rows: Vec<(VawForecaster, PredictionStats)>,
    },
}

struct ContinuousRun<'a> {
    config: &'a ExperimentConfig,
    env: &'a EnvironmentSpec,
    mode: RunMode,
    beta: f64,
    offset: f64,
    truth_rows: Vec<Vec<f64>>,
    model: ContinuousModel,
    /// Squared deviation of the predictions from the truth, per row, in the
    /// units the version space is defined in.
    deviation: Vec<f64>,
    ogd: OgdState,
    greedy_directions: Vec<f64>,
    greedy_loss: Vec<f64>,
}

impl<'a> ContinuousRun<'a> {
    fn new(config: &'a ExperimentConfig, mode: RunMode) -> Result<Self> {
        let env = &config.environment;
        let d = env.dim();
        let lambda = config.oracle.lambda;
        let (truth_rows, offset, model) = match &env.constraint {
            ConstraintSpec::Linear { normal, offset } => (
                vec![normal.clone()],
                *offset,
                ContinuousModel::Linear {
                    vaw: VawForecaster::new(d, lambda),
                    stats: PredictionStats::new(d),
                },
            ),
            ConstraintSpec::Glm {
                normal,
                offset,
                link,
            } => {
                let (c_lower, c_upper) = link.slope_bounds(1.0 + env.action_radius, SLOPE_GRID);
                if c_lower <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "link slope vanishes on the action range".into(),
                    ));
                }
                (
                    vec![normal.clone()],
                    *offset,
                    ContinuousModel::Glm {
                        glm: GlmForecaster::new(d, lambda, *link, *offset, c_lower),
                        gram: crate::linalg::Gram::new(d, lambda),
                        stats: PredictionStats::new(d),
                        link: *link,
                        c_lower,
                        c_upper,
                    },
                )
            }
            ConstraintSpec::Polytopic { rows, offset } => (
                rows.clone(),
                *offset,
                ContinuousModel::Polytopic {
                    rows: rows
                        .iter()
                        .map(|_| (VawForecaster::new(d, lambda), PredictionStats::new(d)))
                        .collect(),
                },
            ),
            ConstraintSpec::Finite { .. } => {
                unreachable!("finite constraint on the continuous path")
            }
        };
        let ogd = OgdState::new(OgdConfig {
            dim: d,
            action_radius: env.action_radius,
            gradient_bound: config.oracle.gradient_bound,
            horizon: config.horizon,
            lattice_resolution: config.oracle.lattice_resolution,
            ray_directions: config.oracle.ray_directions,
            nested: true,
        })?;
        let n_rows = truth_rows.len();
        Ok(Self {
            config,
            env,
            mode,
            beta: config.radius(),
            offset,
            truth_rows,
            model,
            deviation: vec![0.0; n_rows],
            greedy_directions: crate::learning::ogd::directions(d, config.oracle.ray_directions),
            greedy_loss: vec![0.0; d],
            ogd,
        })
    }

    fn version_space(&self, t: usize) -> Result<ContinuousVersionSpace> {
        let mismatch = Error::ModelMismatch { round: t };
        let b = self.offset;
        Ok(match &self.model {
            ContinuousModel::Linear { vaw, stats } => ContinuousVersionSpace::Linear(
                EllipsoidVersionSpace::from_predictions(vaw.gram(), stats, self.beta, b)
                    .ok_or(mismatch)?,
            ),
            ContinuousModel::Glm {
                gram,
                stats,
                link,
                c_lower,
                c_upper,
                ..
            } => {
                let inner = EllipsoidVersionSpace::from_predictions(
                    gram,
                    stats,
                    self.beta / (c_lower * c_lower),
                    b,
                )
                .ok_or(mismatch)?;
                ContinuousVersionSpace::Glm(GlmVersionSpace::new(inner, *link, *c_lower, *c_upper))
            }
            ContinuousModel::Polytopic { rows } => {
                let mut comps = Vec::with_capacity(rows.len());
                for (vaw, stats) in rows {
                    comps.push(
                        EllipsoidVersionSpace::from_predictions(vaw.gram(), stats, self.beta, b)
                            .ok_or(mismatch.clone())?,
                    );
                }
                ContinuousVersionSpace::Product(ProductVersionSpace::new(comps))
            }
        })
    }

    /// Predicts at `a`, folds the prediction into the version-space
    /// statistics, then feeds the regression oracle. Returns the prediction
    /// in constraint units.
    fn observe(&mut self, a: &[f64], feedback: &[f64]) -> f64 {
        let b = self.offset;
        match &mut self.model {
            ContinuousModel::Linear { vaw, stats } => {
                let zhat = vaw.predict(a);
                stats.observe(a, zhat);
                let r = zhat - dot(&self.truth_rows[0], a);
                self.deviation[0] += r * r;
                vaw.update(a, feedback[0] + b);
                zhat - b
            }
            ContinuousModel::Glm {
                glm,
                gram,
                stats,
                link,
                ..
            } => {
                let u = glm.predict_prelink(a);
                stats.observe(a, u);
                gram.add_outer(a, 1.0);
                let pred = link.eval(u - b);
                let r = pred - link.eval(dot(&self.truth_rows[0], a) - b);
                self.deviation[0] += r * r;
                glm.update(a, feedback[0]);
                pred
            }
            ContinuousModel::Polytopic { rows } => {
                let mut worst = f64::NEG_INFINITY;
                for (i, (vaw, stats)) in rows.iter_mut().enumerate() {
                    let zhat = vaw.predict(a);
                    stats.observe(a, zhat);
                    let r = zhat - dot(&self.truth_rows[i], a);
                    self.deviation[i] += r * r;
                    vaw.update(a, feedback[i] + b);
                    worst = worst.max(zhat - b);
                }
                worst
            }
        }
    }

    fn greedy_action(&self, vs: &ContinuousVersionSpace) -> Vec<f64> {
        let d = self.env.dim();
        let mut best = vec![0.0; d];
        let mut best_value = 0.0;
        for u in self.greedy_directions.chunks(d) {
            let reach = vs.pessimistic_reach(u).min(self.env.action_radius);
            let p = scaled(u, reach * (1.0 - 1e-12));
            if !vs.membership(&p).is_pessimistic() {
                continue;
            }
            let v = dot(&self.greedy_loss, &p);
            if v < best_value {
                best_value = v;
                best = p;
            }
        }
        best
    }

    fn run(mut self, observer: &mut dyn FnMut(&RoundView<'_>)) -> Result<RawRun> {
        let seed = self.config.seed;
        let mut noise_rng = rng(seed, NOISE_STREAM);
        let mut loss_rng = rng(seed, LOSS_STREAM);
        let mut learner_rng = rng(seed, LEARNER_STREAM);
        let mut adversary = LossAdversary::new(self.env);
        let horizon = self.config.horizon;
        let mut ledger = base_ledger(self.config, self.beta);
        let mut records = Vec::with_capacity(horizon);
        let mut losses = Vec::with_capacity(horizon);
        let scaling = !matches!(self.config.mapping, MappingKind::Identity);

        for t in 1..=horizon {
            let vs = self.version_space(t)?;
            let covered = self.deviation.iter().all(|&dev| dev <= self.beta);
            observer(&RoundView {
                t,
                sets: SetsView::Continuous(&vs),
                truth_in_version_space: covered,
            });

            let loss = adversary.loss_next(&mut loss_rng);
            let (summary, pre, action, gamma, mapping_id, gap, exp_width, pool, converged);
            match self.mode {
                RunMode::Safe | RunMode::LongTerm => {
                    let rec = self.ogd.recommend(&vs)?;
                    let pick = sample_index(&rec.weights, &mut learner_rng);
                    let map = self.mode == RunMode::Safe && scaling;
                    let mut g_pick = 1.0;
                    let mut expected_gap = 0.0;
                    let mut expected_width = 0.0;
                    for (j, (s, &w)) in rec.support.iter().zip(&rec.weights).enumerate() {
                        let g = if map {
                            vs.gamma_scale(s)
                                .map_err(|_| Error::EmptyPessimisticSet { round: t })?
                        } else {
                            1.0
                        };
                        let mapped = scaled(s, g);
                        expected_gap += w * (dot(&loss, &mapped) - dot(&loss, s));
                        expected_width += w * vs.width(&mapped);
                        if j == pick {
                            g_pick = g;
                        }
                    }
                    let tilde = rec.support[pick].clone();
                    let a = scaled(&tilde, g_pick);
                    if map && !vs.membership(&a).is_pessimistic() {
                        return Err(Error::EmptyPessimisticSet { round: t });
                    }
                    summary = DistributionSummary {
                        support: rec.support.iter().cloned().map(Action::Point).collect(),
                        probabilities: rec.weights.clone(),
                    };
                    pre = Some(tilde);
                    action = a;
                    gamma = g_pick;
                    mapping_id = if map {
                        MappingId::Scaling
                    } else {
                        MappingId::Identity
                    };
                    gap = expected_gap;
                    exp_width = expected_width;
                    pool = Some(rec.pool_size);
                    converged = rec.converged;
                }
                RunMode::PessimisticGreedy => {
                    let a = self.greedy_action(&vs);
                    summary = DistributionSummary {
                        support: vec![Action::Point(a.clone())],
                        probabilities: vec![1.0],
                    };
                    pre = None;
                    exp_width = vs.width(&a);
                    action = a;
                    gamma = 1.0;
                    mapping_id = MappingId::PessimisticGreedy;
                    gap = 0.0;
                    pool = None;
                    converged = true;
                }
            }

            let played = Action::Point(action.clone());
            let feedback = self.env.feedback_draw(&played, &mut noise_rng);
            let constraint_value = self.env.constraint_eval(&played);
            let width_at_action = vs.width(&action);
            let width_pre_map = pre.as_ref().map(|p| vs.width(p));
            let prediction = self.observe(&action, &feedback);
            if self.mode == RunMode::PessimisticGreedy {
                for (g, l) in self.greedy_loss.iter_mut().zip(&loss) {
                    *g += l;
                }
            } else {
                self.ogd.update(&loss)?;
            }
            adversary.observe_play(&played);

            let rec = RoundRecord {
                t,
                loss_value: dot(&loss, &action),
                action: played,
                recommended_distribution_summary: summary,
                pre_map_action: pre.map(Action::Point),
                mapping_id,
                kappa: None,
                gamma,
                width_at_action,
                width_pre_map,
                prediction,
                constraint_value,
                feedback,
                violated: constraint_value > 0.0,
                expected_loss_gap: gap,
                expected_width: exp_width,
                truth_in_version_space: covered,
                optimistic_size: None,
                pessimistic_size: None,
                survivors: None,
                pool_size: pool,
                projection_converged: converged,
                cumulative_regret_proxy: 0.0,
            };
            account(&mut ledger, &rec);
            records.push(rec);
            losses.push(loss);
        }
        Ok(RawRun {
            records,
            ledger,
            losses,
        })
    }
}

struct FiniteRun<'a> {
    config: &'a ExperimentConfig,
    env: &'a EnvironmentSpec,
    mode: RunMode,
    beta: f64,
    table: Vec<Vec<f64>>,
    truth: usize,
    class: Vec<usize>,
    deviation: Vec<f64>,
    forecaster: FiniteForecaster,
    hedge: SleepingHedge,
    bandit: Option<(Exp3, Vec<f64>)>,
    greedy_loss: Vec<f64>,
}

impl<'a> FiniteRun<'a> {
    fn new(config: &'a ExperimentConfig, mode: RunMode) -> Result<Self> {
        let env = &config.environment;
        let ConstraintSpec::Finite { table, truth } = &env.constraint else {
            unreachable!("continuous constraint on the finite path")
        };
        let class = env.initial_class();
        let k = env.dim();
        let bandit = match (mode, config.mapping) {
            (RunMode::Safe, MappingKind::SaddleExp3) => {
                let grid = kappa_grid(config.horizon);
                Some((Exp3::new(grid.len(), config.horizon), grid))
            }
            _ => None,
        };
        Ok(Self {
            config,
            env,
            mode,
            beta: config.radius(),
            table: table.clone(),
            truth: *truth,
            deviation: vec![0.0; class.len()],
            forecaster: FiniteForecaster::new(class.clone()),
            class,
            hedge: SleepingHedge::new(k, config.horizon),
            bandit,
            greedy_loss: vec![0.0; k],
        })
    }

    fn run(mut self, observer: &mut dyn FnMut(&RoundView<'_>)) -> Result<RawRun> {
        let seed = self.config.seed;
        let mut noise_rng = rng(seed, NOISE_STREAM);
        let mut loss_rng = rng(seed, LOSS_STREAM);
        let mut learner_rng = rng(seed, LEARNER_STREAM);
        let mut adversary = LossAdversary::new(self.env);
        let horizon = self.config.horizon;
        let k = self.env.dim();
        let mut ledger = base_ledger(self.config, self.beta);
        let mut records = Vec::with_capacity(horizon);
        let mut losses = Vec::with_capacity(horizon);
        let truth_pos = self.class.iter().position(|&j| j == self.truth);

        for t in 1..=horizon {
            let survivors: Vec<usize> = self
                .class
                .iter()
                .zip(&self.deviation)
                .filter(|(_, &d)| d <= self.beta)
                .map(|(&j, _)| j)
                .collect();
            let vs = FiniteVersionSpace::new(&self.table, survivors)
                .ok_or(Error::ModelMismatch { round: t })?;
            let covered = truth_pos.is_some_and(|p| self.deviation[p] <= self.beta);
            observer(&RoundView {
                t,
                sets: SetsView::Finite(&vs),
                truth_in_version_space: covered,
            });

            let awake: Vec<bool> = (0..k).map(|a| vs.membership(a).is_optimistic()).collect();
            let recommended = self.hedge.recommend(&awake)?;
            let tag = |e: Error| match e {
                Error::EmptyPessimisticSet { .. } => Error::EmptyPessimisticSet { round: t },
                other => other,
            };
            let mut kappa = None;
            let mut arm = None;
            let (p, mapping_id) = match self.mode {
                RunMode::LongTerm => (recommended.clone(), MappingId::Identity),
                RunMode::PessimisticGreedy => {
                    let pess = vs.pessimistic_set();
                    let mut best = *pess
                        .first()
                        .ok_or(Error::EmptyPessimisticSet { round: t })?;
                    for &a in &pess {
                        if self.greedy_loss[a] < self.greedy_loss[best] {
                            best = a;
                        }
                    }
                    let mut p = vec![0.0; k];
                    p[best] = 1.0;
                    (p, MappingId::PessimisticGreedy)
                }
                RunMode::Safe => match (&self.bandit, self.config.mapping) {
                    (Some((exp3, grid)), _) => {
                        let (i, probs) = exp3.select(&mut learner_rng);
                        kappa = Some(grid[i]);
                        arm = Some((i, probs));
                        let s = saddle_map_finite(grid[i], &recommended, &self.table, &vs)
                            .map_err(tag)?;
                        (s.distribution, MappingId::Saddle)
                    }
                    (None, MappingKind::Identity) => (recommended.clone(), MappingId::Identity),
                    _ => (
                        explore_exploit_map(&recommended, &vs).map_err(tag)?,
                        MappingId::ExploreExploit,
                    ),
                },
            };
            let a = sample_index(&p, &mut learner_rng);
            let played = Action::Index(a);
            let loss = adversary.loss_next(&mut loss_rng);
            let feedback = self.env.feedback_draw(&played, &mut noise_rng);
            let constraint_value = self.env.constraint_eval(&played);

            let zhat = self.forecaster.predict(&self.table, a);
            for (dev, &j) in self.deviation.iter_mut().zip(&self.class) {
                let r = self.table[j][a] - zhat;
                *dev += r * r;
            }
            self.forecaster.update(&self.table, a, feedback[0]);
            self.hedge.update(&awake, &recommended, &loss);
            if let (Some((exp3, _)), Some((i, probs))) = (self.bandit.as_mut(), arm) {
                exp3.update(i, loss[a], &probs);
            }
            for (g, l) in self.greedy_loss.iter_mut().zip(&loss) {
                *g += l;
            }
            adversary.observe_play(&played);

            let expected_loss_gap: f64 = loss
                .iter()
                .zip(p.iter().zip(&recommended))
                .map(|(l, (pa, qa))| l * (pa - qa))
                .sum();
            let expected_width: f64 = p.iter().enumerate().map(|(i, pa)| pa * vs.width(i)).sum();
            let (support, probabilities) = recommended
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(i, &q)| (Action::Index(i), q))
                .unzip();
            let rec = RoundRecord {
                t,
                loss_value: loss[a],
                action: played,
                recommended_distribution_summary: DistributionSummary {
                    support,
                    probabilities,
                },
                pre_map_action: None,
                mapping_id,
                kappa,
                gamma: 1.0,
                width_at_action: vs.width(a),
                width_pre_map: None,
                prediction: zhat,
                constraint_value,
                feedback,
                violated: constraint_value > 0.0,
                expected_loss_gap,
                expected_width,
                truth_in_version_space: covered,
                optimistic_size: Some(awake.iter().filter(|&&x| x).count()),
                pessimistic_size: Some(vs.pessimistic_set().len()),
                survivors: Some(vs.survivors().len()),
                pool_size: None,
                projection_converged: true,
                cumulative_regret_proxy: 0.0,
            };
            account(&mut ledger, &rec);
            records.push(rec);
            losses.push(loss);
        }
        Ok(RawRun {
            records,
            ledger,
            losses,
        })
    }
}
