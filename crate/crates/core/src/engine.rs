//! Trading-period loop, single runs and seeded ensembles.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::auction::{clear_market, ClearingCounts, ClearingResult, Order};
use crate::learning::{sample_index, softmax_into, update_attractions};
use crate::observables::{
    market_side, quadrant, reduce_coords, reduce_two_group, Moments, PersistenceSummary,
    PersistenceTracker, ReducedCoords,
};
use crate::params::{Action, Market, ModelParams, Side, Variant, N_MARKETS};
use crate::rng::run_stream;

/// Attractions of one agent. Four-action agents use all four slots
/// (B1, S1, B2, S2); two-group agents use the first two (market 1, market 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub attractions: [f64; 4],
    pub group: Option<usize>,
}

impl AgentState {
    pub fn four_action() -> Self {
        AgentState { attractions: [0.0; 4], group: None }
    }

    pub fn two_group(group: usize) -> Self {
        AgentState { attractions: [0.0; 4], group: Some(group) }
    }

    pub fn n_actions(&self) -> usize {
        if self.group.is_some() {
            2
        } else {
            4
        }
    }

    pub fn attractions(&self) -> &[f64] {
        &self.attractions[..self.n_actions()]
    }

    pub fn attractions_mut(&mut self) -> &mut [f64] {
        let n = self.n_actions();
        &mut self.attractions[..n]
    }

    pub fn reduce(&self, params: &ModelParams) -> ReducedCoords {
        match self.group {
            None => reduce_coords(&self.attractions, params.temperature),
            Some(g) => reduce_two_group(
                &[self.attractions[0], self.attractions[1]],
                params.temperature,
                params.group_buy_prefs[g],
            ),
        }
    }

    /// Sign region used for persistence: a quadrant for four-action agents,
    /// a market half-plane for two-group agents.
    pub fn region(&self) -> Option<u8> {
        let [b1, s1, b2, s2] = self.attractions;
        let c = match self.group {
            None => ReducedCoords {
                delta_bs: 0.5 * (b1 + b2 - s1 - s2),
                delta_12: 0.5 * (b1 + s1 - b2 - s2),
                ..Default::default()
            },
            Some(_) => ReducedCoords { delta_12: b1 - s1, ..Default::default() },
        };
        match self.group {
            None => quadrant(&c),
            Some(_) => market_side(&c),
        }
    }
}

/// Fresh population with all attractions at zero.
pub fn initial_agents(params: &ModelParams) -> Vec<AgentState> {
    (0..params.n_agents)
        .map(|i| match params.variant {
            Variant::FourAction => AgentState::four_action(),
            Variant::TwoGroup => AgentState::two_group(params.group_of(i)),
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct PeriodOutcome {
    pub markets: [ClearingResult; N_MARKETS],
    /// Action taken by each agent this period.
    pub actions: Vec<Action>,
    /// Realized score of each agent (0 when unmatched).
    pub scores: Vec<f64>,
}

fn price_distributions(params: &ModelParams) -> (Normal<f64>, Normal<f64>) {
    (
        Normal::new(params.mu_bid, params.sigma_bid).expect("validated sigma_bid"),
        Normal::new(params.mu_ask, params.sigma_ask).expect("validated sigma_ask"),
    )
}

/// Generates the orders of one period, one per agent, in agent order.
fn submit_orders<R: Rng + ?Sized>(
    agents: &[AgentState],
    params: &ModelParams,
    rng: &mut R,
    actions: &mut Vec<Action>,
    books: &mut [Vec<Order>; N_MARKETS],
) {
    let (bid_dist, ask_dist) = price_distributions(params);
    let mut probs = [0.0; 4];
    actions.clear();
    for book in books.iter_mut() {
        book.clear();
    }
    for (i, agent) in agents.iter().enumerate() {
        let n = agent.n_actions();
        softmax_into(agent.attractions(), params.temperature, &mut probs[..n]);
        let pick = sample_index(&probs[..n], rng.random::<f64>());
        let action = match agent.group {
            None => Action::from_index(pick),
            Some(g) => {
                let side = if rng.random::<f64>() < params.group_buy_prefs[g] {
                    Side::Buy
                } else {
                    Side::Sell
                };
                Action { market: Market::from_index(pick), side }
            }
        };
        let price = match action.side {
            Side::Buy => bid_dist.sample(rng),
            Side::Sell => ask_dist.sample(rng),
        };
        actions.push(action);
        books[action.market.index()].push(Order { trader: i, market: action.market, side: action.side, price });
    }
}

/// One trading period: choose, submit, clear both markets, learn.
pub fn run_period<R: Rng + ?Sized>(
    agents: &mut [AgentState],
    params: &ModelParams,
    rng: &mut R,
) -> PeriodOutcome {
    let mut actions = Vec::with_capacity(agents.len());
    let mut books: [Vec<Order>; N_MARKETS] = Default::default();
    submit_orders(agents, params, rng, &mut actions, &mut books);

    let markets = [
        clear_market(&books[0], params.theta[0], rng),
        clear_market(&books[1], params.theta[1], rng),
    ];

    let mut scores = vec![0.0; agents.len()];
    for res in &markets {
        for &(trader, s) in &res.scores {
            scores[trader] = s;
        }
    }
    for (i, agent) in agents.iter_mut().enumerate() {
        let chosen = match agent.group {
            None => actions[i].index(),
            Some(_) => actions[i].market.index(),
        };
        update_attractions(agent.attractions_mut(), chosen, scores[i], params.forgetting_rate);
    }
    PeriodOutcome { markets, actions, scores }
}

/// Which periods of a run are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// The final `k` periods.
    Last(usize),
    Every,
    Nothing,
}

impl Default for Recording {
    fn default() -> Self {
        Recording::Last(100)
    }
}

impl Recording {
    fn records(&self, period: usize, horizon: usize) -> bool {
        match *self {
            Recording::Last(k) => period + k > horizon,
            Recording::Every => true,
            Recording::Nothing => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub recording: Recording,
    /// Track sign-region persistence on every period.
    pub persistence: bool,
    /// Periods excluded from persistence statistics. With a nonzero burn-in
    /// the interval in progress when tracking starts is dropped, since its
    /// start is unknown.
    pub persistence_burn_in: usize,
    /// Store the population-mean attraction vector of every period.
    pub population_means: bool,
}

/// State after a given period (periods count from 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: usize,
    pub coords: Vec<ReducedCoords>,
    pub counts: [ClearingCounts; N_MARKETS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<PeriodRecord>,
    pub final_agents: Vec<AgentState>,
    pub persistence: PersistenceSummary,
    /// Population-mean attractions after each period, if requested.
    pub population_means: Vec<[f64; 4]>,
}

/// A single seeded run over `params.horizon` periods.
pub fn run_simulation(params: &ModelParams, master_seed: u64, run_index: u64, opts: RunOptions) -> Trajectory {
    let mut rng = run_stream(master_seed, run_index);
    let mut agents = initial_agents(params);
    let mut records = Vec::new();
    let fresh = if opts.persistence_burn_in == 0 {
        PersistenceTracker::default()
    } else {
        PersistenceTracker::joining()
    };
    let mut trackers = vec![fresh; agents.len()];
    let mut persistence = PersistenceSummary::default();
    let mut population_means = Vec::new();
    let r = params.forgetting_rate;

    for period in 1..=params.horizon {
        let outcome = run_period(&mut agents, params, &mut rng);
        if opts.persistence && period > opts.persistence_burn_in {
            for (agent, tracker) in agents.iter().zip(trackers.iter_mut()) {
                if let Some(done) = tracker.observe(agent.region()) {
                    persistence.add_completed(r * done.periods as f64);
                }
            }
        }
        if opts.population_means {
            let mut mean = [0.0; 4];
            for a in &agents {
                for (m, x) in mean.iter_mut().zip(a.attractions) {
                    *m += x;
                }
            }
            population_means.push(mean.map(|m| m / agents.len() as f64));
        }
        if opts.recording.records(period, params.horizon) {
            records.push(PeriodRecord {
                period,
                coords: agents.iter().map(|a| a.reduce(params)).collect(),
                counts: [outcome.markets[0].counts, outcome.markets[1].counts],
            });
        }
    }
    if opts.persistence {
        for tracker in trackers {
            if let Some(open) = tracker.finish() {
                persistence.add_censored(r * open.periods as f64);
            }
        }
    }
    Trajectory { records, final_agents: agents, persistence, population_means }
}

/// Moment accumulators of one run's recorded samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunMoments {
    pub delta_bs: Moments,
    pub delta_12: Moments,
}

impl RunMoments {
    fn from_trajectory(traj: &Trajectory) -> Self {
        let mut m = RunMoments::default();
        for c in traj.records.iter().flat_map(|r| &r.coords) {
            m.delta_bs.push(c.delta_bs);
            m.delta_12.push(c.delta_12);
        }
        m
    }

    fn merge(&mut self, other: &RunMoments) {
        self.delta_bs.merge(&other.delta_bs);
        self.delta_12.merge(&other.delta_12);
    }

    /// `(B_bs, B_12, B_mean)`. Two-group agents have no buy/sell coordinate,
    /// so there `B_bs` is NaN and the mean is `B_12`.
    fn binder(&self, variant: Variant) -> (f64, f64, f64) {
        let d12 = self.delta_12.binder().unwrap_or(f64::NAN);
        match variant {
            Variant::FourAction => {
                let bs = self.delta_bs.binder().unwrap_or(f64::NAN);
                (bs, d12, 0.5 * (bs + d12))
            }
            Variant::TwoGroup => (f64::NAN, d12, d12),
        }
    }
}

/// Pooled results of independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub params: ModelParams,
    pub master_seed: u64,
    pub n_runs: usize,
    /// Pooled reduced coordinates, run-major then period then agent. Empty
    /// unless samples were kept.
    pub samples: Vec<ReducedCoords>,
    pub n_samples: u64,
    pub per_run: Vec<RunMoments>,
    pub persistence: PersistenceSummary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinderEstimate {
    pub binder_bs: f64,
    pub binder_12: f64,
    pub binder_mean: f64,
    /// Standard error of `binder_mean` from its run-to-run scatter.
    pub stderr: f64,
}

impl EnsembleStats {
    /// Binder cumulants of the pooled samples with a run-scatter error bar.
    pub fn binder(&self) -> BinderEstimate {
        let mut pooled = RunMoments::default();
        for m in &self.per_run {
            pooled.merge(m);
        }
        let variant = self.params.variant;
        let (binder_bs, binder_12, binder_mean) = pooled.binder(variant);
        let per_run: Vec<f64> = self
            .per_run
            .iter()
            .map(|m| m.binder(variant).2)
            .filter(|b| b.is_finite())
            .collect();
        let stderr = if per_run.len() < 2 {
            f64::NAN
        } else {
            let n = per_run.len() as f64;
            let mean = per_run.iter().sum::<f64>() / n;
            let var = per_run.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        BinderEstimate { binder_bs, binder_12, binder_mean, stderr }
    }
}

/// `n_runs` independent runs from `master_seed`, pooled. Run `k` always uses
/// stream `k`, so the result does not depend on scheduling.
pub fn run_ensemble(
    params: &ModelParams,
    n_runs: usize,
    master_seed: u64,
    opts: RunOptions,
    keep_samples: bool,
) -> EnsembleStats {
    assert!(n_runs >= 1, "an ensemble needs at least one run");
    let runs: Vec<(RunMoments, Vec<ReducedCoords>, PersistenceSummary, u64)> = (0..n_runs)
        .into_par_iter()
        .map(|k| {
            let traj = run_simulation(params, master_seed, k as u64, opts);
            let moments = RunMoments::from_trajectory(&traj);
            let n = traj.records.iter().map(|r| r.coords.len() as u64).sum();
            let samples = if keep_samples {
                traj.records.into_iter().flat_map(|r| r.coords).collect()
            } else {
                Vec::new()
            };
            (moments, samples, traj.persistence, n)
        })
        .collect();

    let mut stats = EnsembleStats {
        params: params.clone(),
        master_seed,
        n_runs,
        samples: Vec::new(),
        n_samples: 0,
        per_run: Vec::with_capacity(n_runs),
        persistence: PersistenceSummary::default(),
    };
    for (moments, samples, persistence, n) in runs {
        stats.per_run.push(moments);
        stats.samples.extend(samples);
        stats.n_samples += n;
        stats.persistence.merge(&persistence);
    }
    stats
}

/// Early-versus-late comparison of population-mean attractions.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub early_mean: [f64; 4],
    pub late_mean: [f64; 4],
    pub early_stderr: [f64; 4],
    pub late_stderr: [f64; 4],
    /// Largest `|late - early|` in units of the pooled standard error.
    pub max_z: f64,
}

impl StationarityReport {
    pub fn is_stationary(&self, z_limit: f64) -> bool {
        self.max_z < z_limit
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Compares window averages of the population-mean attractions over the
/// periods `early` and `late` (1-based, inclusive) across `n_runs` runs.
pub fn stationarity(
    params: &ModelParams,
    n_runs: usize,
    master_seed: u64,
    early: std::ops::RangeInclusive<usize>,
    late: std::ops::RangeInclusive<usize>,
) -> StationarityReport {
    let opts = RunOptions { recording: Recording::Nothing, population_means: true, ..Default::default() };
    let window = |means: &[[f64; 4]], w: &std::ops::RangeInclusive<usize>| -> [f64; 4] {
        let rows = &means[w.start() - 1..*w.end()];
        std::array::from_fn(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64)
    };
    let per_run: Vec<([f64; 4], [f64; 4])> = (0..n_runs)
        .into_par_iter()
        .map(|k| {
            let traj = run_simulation(params, master_seed, k as u64, opts);
            (window(&traj.population_means, &early), window(&traj.population_means, &late))
        })
        .collect();
    let mut report = StationarityReport {
        early_mean: [0.0; 4],
        late_mean: [0.0; 4],
        early_stderr: [0.0; 4],
        late_stderr: [0.0; 4],
        max_z: 0.0,
    };
    for k in 0..params.n_actions() {
        let e: Vec<f64> = per_run.iter().map(|r| r.0[k]).collect();
        let l: Vec<f64> = per_run.iter().map(|r| r.1[k]).collect();
        (report.early_mean[k], report.early_stderr[k]) = mean_and_stderr(&e);
        (report.late_mean[k], report.late_stderr[k]) = mean_and_stderr(&l);
        let se = report.early_stderr[k].hypot(report.late_stderr[k]);
        let z = (report.late_mean[k] - report.early_mean[k]).abs() / se;
        report.max_z = report.max_z.max(z);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledReturns {
    /// Mean score of agents that took each action.
    pub mean_score: [f64; 4],
    /// Number of agents that took each action.
    pub takers: [u64; 4],
    pub counts: [ClearingCounts; N_MARKETS],
}

/// Average realized score per action in one period with `n_agents` agents
/// drawing actions from `action_probs(agent)` (ordered B1, S1, B2, S2).
///
/// A direct simulation of the clearing mechanism, used as the
/// large-population check on the closed-form expected returns.
pub fn sample_period_returns<R, F>(params: &ModelParams, n_agents: usize, action_probs: F, rng: &mut R) -> SampledReturns
where
    R: Rng + ?Sized,
    F: Fn(usize) -> [f64; 4],
{
    let (bid_dist, ask_dist) = price_distributions(params);
    let mut books: [Vec<Order>; N_MARKETS] = Default::default();
    let mut actions = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        let probs = action_probs(i);
        let action = Action::from_index(sample_index(&probs, rng.random::<f64>()));
        let price = match action.side {
            Side::Buy => bid_dist.sample(rng),
            Side::Sell => ask_dist.sample(rng),
        };
        actions.push(action);
        books[action.market.index()].push(Order { trader: i, market: action.market, side: action.side, price });
    }
    let markets = [
        clear_market(&books[0], params.theta[0], rng),
        clear_market(&books[1], params.theta[1], rng),
    ];
    let mut sum = [0.0; 4];
    let mut takers = [0u64; 4];
    for a in &actions {
        takers[a.index()] += 1;
    }
    for res in &markets {
        for &(trader, s) in &res.scores {
            sum[actions[trader].index()] += s;
        }
    }
    let mut mean_score = [0.0; 4];
    for k in 0..4 {
        mean_score[k] = if takers[k] > 0 { sum[k] / takers[k] as f64 } else { 0.0 };
    }
    SampledReturns { mean_score, takers, counts: [markets[0].counts, markets[1].counts] }
}
