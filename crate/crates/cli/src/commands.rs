//! The five subcommands. Each writes its CSVs into one output directory.

use std::fs;
use std::path::Path;

use multistage::{
    build_discrete_env, build_ng_chain, build_ni_chain, check_prop2, check_windows, design_levels,
    evaluate_policy, long_term_utilities, policy_value, run_experiment_with, sarsa_train,
    select_direction, theorem_bounds, total_variation, value_iteration_oracle,
    verify_detailed_balance, Averaging, ChainModel, ClassWindows64, Condition, ExperimentSummary,
    Ladder64, LadderDesign, ModelParams64, PolicyKind, Restriction, Simulator, TabularPolicy,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LadderSpec};
use crate::error::CliError;
use crate::output::{check, num, Table};

/// Everything a command needs, resolved once.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub params: ModelParams64,
    pub ladder: Ladder64,
    pub ng: ClassWindows64,
    pub ni: Option<ClassWindows64>,
    pub hash: String,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, CliError> {
        let params = cfg.params()?;
        let ng_cost = select_direction(&params, Restriction::ImprovementOnly)?.unit_cost;
        let ni_cost = select_direction(&params, Restriction::GamingOnly)?.unit_cost;
        let ng = ClassWindows64::compute(&params, ng_cost)?;
        // Gaming may never pay; the simulator then treats NI as idle.
        let ni = match ClassWindows64::compute(&params, ni_cost) {
            Ok(w) => Some(w),
            Err(multistage::Error::EmptyLocalMaximizers { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let ladder = build_ladder(&cfg, &params, &ng)?;
        let hash = cfg.hash();
        Ok(Self {
            cfg,
            params,
            ladder,
            ng,
            ni,
            hash,
        })
    }

    fn ni_windows(&self) -> Result<&ClassWindows64, CliError> {
        self.ni.as_ref().ok_or_else(|| {
            CliError::Config("gaming never pays at these costs; NI windows are empty".into())
        })
    }

    fn simulator(&self) -> Result<Simulator<f64>, CliError> {
        Ok(Simulator::new(self.params.clone(), self.ladder.clone())?)
    }
}

pub fn build_ladder(
    cfg: &ExperimentConfig,
    params: &ModelParams64,
    ng: &ClassWindows64,
) -> Result<Ladder64, CliError> {
    match &cfg.ladder {
        LadderSpec::Explicit(t) => Ladder64::new(t.clone())
            .map_err(|e| CliError::Config(format!("ladder.thresholds: {e}"))),
        LadderSpec::Even { levels, cap } => Ladder64::evenly_spaced(*levels, cap / *levels as f64)
            .map_err(|e| CliError::Config(format!("ladder.cap: {e}"))),
        LadderSpec::Designed { delta_mu, cap } => {
            match design_levels(*delta_mu, *cap, ng, params.gamma()) {
                Ok(Some(d)) => Ok(d.ladder),
                Ok(None) => Err(CliError::Infeasible(format!(
                    "delta_mu = {delta_mu}, cap = {cap}"
                ))),
                Err(multistage::Error::InvalidParameter { name, reason }) => {
                    Err(CliError::Config(format!("ladder.{name}: {reason}")))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::A => "a",
        Condition::B => "b",
        Condition::C => "c",
    }
}

pub fn design(ctx: &Context, out: &Path) -> Result<(), CliError> {
    let ws = ctx.ng.for_ladder(&ctx.ladder);
    let mut t = Table::new(&["level", "threshold", "class", "mu_under", "mu_bar"]);
    for w in &ws {
        t.push(vec![
            w.level_index.to_string(),
            num(w.mu),
            format!("{:?}", w.class).to_lowercase(),
            num(w.mu_under),
            num(w.mu_bar),
        ]);
    }
    t.write(&out.join("thresholds.csv"), &ctx.hash, "design")?;

    let design = LadderDesign::from_ladder(ctx.ladder.clone(), &ctx.ng);
    let report = multistage::check_incremental_thresholding(&design, ctx.params.gamma())?;
    let mut c = Table::new(&["check", "value", "pass"]);
    c.push(check("levels", ctx.ladder.len(), true));
    c.push(check("condition_a", report.cond_a, report.cond_a));
    c.push(check("condition_b", report.cond_b, report.cond_b));
    c.push(check("condition_c", report.cond_c, report.cond_c));
    for s in &report.slacks {
        c.push(check(
            &format!("slack_{}_{}", condition_name(s.condition), s.level),
            num(s.value),
            s.holds(),
        ));
    }
    c.write(&out.join("conditions.csv"), &ctx.hash, "design")?;

    let thresholds: Vec<String> = ctx.ladder.thresholds().iter().map(|&x| num(x)).collect();
    let mut toml = format!(
        "# config_hash={}\n[ladder]\nthresholds = [{}]\n",
        ctx.hash,
        thresholds.join(", ")
    );
    if !report.all() {
        toml.push_str("# does not satisfy incremental thresholding\n");
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("ladder.toml"), toml)?;
    Ok(())
}

pub fn simulate(ctx: &Context, out: &Path) -> Result<ExperimentSummary<f64>, CliError> {
    let run = &ctx.cfg.run;
    let sim = ctx.simulator()?;
    let policy = ctx.cfg.policy()?;
    let averaging = run
        .burn_in
        .map_or(Averaging::Window(run.window), Averaging::BurnIn);
    let summary = run_experiment_with(
        &sim,
        policy,
        run.trials,
        run.horizon,
        averaging,
        run.seed,
        run.x0,
    )?;
    let cmd = format!("simulate policy={}", policy.name());

    let rows: Vec<Vec<(String, f64)>> = summary
        .trials
        .iter()
        .map(multistage::dynamics::metric_row)
        .collect();
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend(rows[0].iter().map(|(n, _)| n.clone()));
    let mut m = Table::with_header(header);
    for (k, r) in rows.iter().enumerate() {
        let mut row = vec![k.to_string(), run.seed.wrapping_add(k as u64).to_string()];
        row.extend(r.iter().map(|(_, v)| num(*v)));
        m.push(row);
    }
    m.write(&out.join("metrics.csv"), &ctx.hash, &cmd)?;

    let mut s = Table::new(&["metric", "mean", "std"]);
    for ms in &summary.metrics {
        s.push(vec![ms.metric.clone(), num(ms.mean), num(ms.std)]);
    }
    s.write(&out.join("summary.csv"), &ctx.hash, &cmd)?;

    let mut d = Table::new(&["level", "mean", "std"]);
    for i in 1..=ctx.ladder.len() {
        let ms = summary
            .get(&format!("q_{i}"))
            .expect("level metric present");
        d.push(vec![i.to_string(), num(ms.mean), num(ms.std)]);
    }
    d.write(&out.join("level_distribution.csv"), &ctx.hash, &cmd)?;

    if run.trajectory {
        write_trajectory(&sim, policy, ctx, out, &cmd)?;
    }
    Ok(summary)
}

fn write_trajectory(
    sim: &Simulator<f64>,
    policy: PolicyKind,
    ctx: &Context,
    out: &Path,
    cmd: &str,
) -> Result<(), CliError> {
    let run = &ctx.cfg.run;
    let traj = sim.run_trial(policy, run.horizon, run.seed, run.x0);
    let mut t = Table::new(&[
        "t",
        "level",
        "x",
        "action",
        "kind",
        "y_hat",
        "outcome",
        "next_level",
        "utility",
        "realized_utility",
        "accuracy",
    ]);
    for r in &traj {
        t.push(vec![
            r.time.to_string(),
            r.state_before.level.to_string(),
            num(r.state_before.attribute),
            num(r.action_scalar),
            multistage::dynamics::kind_name(r.action_kind).to_string(),
            num(r.y_hat),
            r.outcome.name().to_string(),
            r.next_level().to_string(),
            num(r.utility),
            num(r.realized_utility),
            num(r.accuracy),
        ]);
    }
    t.write(&out.join("trajectory.csv"), &ctx.hash, cmd)
}

fn chain_table(chain: &ChainModel<f64>) -> Table {
    let mut t = Table::new(&["level", "attribute", "origin_level", "decay_steps", "pi"]);
    for (s, &p) in chain.states.iter().zip(&chain.stationary) {
        let (j, k) = s.origin.map_or((String::new(), String::new()), |(j, k)| {
            (j.to_string(), k.to_string())
        });
        t.push(vec![s.level.to_string(), num(s.attribute), j, k, num(p)]);
    }
    t
}

pub fn stationary(ctx: &Context, out: &Path) -> Result<(), CliError> {
    let st = &ctx.cfg.stationary;
    let ni_w = ctx.ni_windows()?.for_ladder(&ctx.ladder);
    let ng_w = ctx.ng.for_ladder(&ctx.ladder);
    let ni_chain = build_ni_chain(&ctx.params, &ctx.ladder, &ni_w)?;
    chain_table(&ni_chain).write(&out.join("chain_ni.csv"), &ctx.hash, "stationary")?;
    let ni_bal = verify_detailed_balance(&ni_chain, &ctx.params, &ctx.ladder, &ni_w)?;
    let mut b = Table::new(&["chain", "edge", "residual"]);
    for (k, r) in ni_bal.residuals.iter().enumerate() {
        b.push(vec!["ni".into(), format!("{}-{}", k + 1, k + 2), num(*r)]);
    }
    let mut r = Table::new(&["check", "value", "pass"]);
    r.push(check(
        "ni_residual",
        num(ni_chain.residual()),
        ni_chain.residual() < 1e-10,
    ));
    r.push(check(
        "ni_balance_max",
        num(ni_bal.max_residual()),
        ni_bal.max_residual() < 1e-10,
    ));
    r.push(check("ni_mean_level", num(ni_chain.mean_level()), true));
    let l = multistage::ni_peak_level(&ni_w);
    r.push(check("l_index", l, l > 0));

    // The NG chain is only defined on ladders that keep the agent improving.
    let compliant = check_windows(&ng_w, ctx.params.gamma()).all();
    r.push(check("incremental_thresholding", compliant, true));
    if compliant {
        stationary_ng(ctx, &ni_chain, &ni_w, &ng_w, &mut b, &mut r)?;
        chain_table(&build_ng_chain(&ctx.params, &ctx.ladder, &ng_w, st.depth)?).write(
            &out.join("chain_ng.csv"),
            &ctx.hash,
            "stationary",
        )?;
    }
    b.write(&out.join("balance.csv"), &ctx.hash, "stationary")?;
    r.write(&out.join("report.csv"), &ctx.hash, "stationary")?;
    Ok(())
}

fn stationary_ng(
    ctx: &Context,
    ni_chain: &ChainModel<f64>,
    ni_w: &[multistage::EffortWindow64],
    ng_w: &[multistage::EffortWindow64],
    b: &mut Table,
    r: &mut Table,
) -> Result<(), CliError> {
    let st = &ctx.cfg.stationary;
    let ng_chain = build_ng_chain(&ctx.params, &ctx.ladder, ng_w, st.depth)?;
    let ng_bal = verify_detailed_balance(&ng_chain, &ctx.params, &ctx.ladder, ng_w)?;
    for (k, res) in ng_bal.residuals.iter().enumerate() {
        b.push(vec!["ng".into(), format!("{}-{}", k + 1, k + 2), num(*res)]);
    }
    r.push(check(
        "ng_residual",
        num(ng_chain.residual()),
        ng_chain.residual() < 1e-10,
    ));
    r.push(check(
        "ng_balance_max",
        num(ng_bal.max_residual()),
        ng_bal.max_residual() < 1e-10,
    ));
    r.push(check("ng_mean_level", num(ng_chain.mean_level()), true));
    r.push(check("ng_states", ng_chain.len(), true));
    r.push(check(
        "ng_truncated",
        ng_chain.truncated,
        ng_chain.truncated == 0,
    ));
    if st.depth_check {
        let deeper = build_ng_chain(&ctx.params, &ctx.ladder, ng_w, 2 * st.depth)?;
        let tv = total_variation(&ng_chain, &deeper);
        r.push(check("ng_depth_doubling_tv", num(tv), tv < 1e-6));
    }

    let report = theorem_bounds(&ctx.params, &ctx.ladder, ni_chain, &ng_chain, ni_w, ng_w)?;
    let (u_ni, u_ng) = long_term_utilities(ni_chain, &ng_chain, ni_w, ng_w, &ctx.params);
    let t = ctx.ladder.thresholds();
    let delta_mu = t[1] - t[0];
    r.push(check(
        "sigma_ni",
        num(report.sigma_ni),
        report.sigma_ni > 0.5,
    ));
    r.push(check(
        "sigma_ng",
        num(report.sigma_ng),
        report.sigma_ng > 0.5,
    ));
    r.push(check(
        "ni_peak_at_l",
        report.ni_peak_at_l,
        report.ni_peak_at_l,
    ));
    r.push(check(
        "ng_peak_at_top",
        report.ng_peak_at_top,
        report.ng_peak_at_top,
    ));
    let literal = report.ng_decay_holds(1e-12);
    r.push(check("ng_decay_geometric", literal, literal));
    let edges = report.ng_edge_bounds_hold(1e-12);
    r.push(check("ng_decay_edge_product", edges, edges));
    let (x_ni, x_ng, floor) = report.attribute_bounds;
    r.push(check("x_hat_ni", num(x_ni), x_ni == 0.0));
    r.push(check("x_hat_ng", num(x_ng), x_ng >= floor));
    r.push(check("x_hat_ng_floor", num(floor), true));
    r.push(check("u_hat_ni", num(u_ni), true));
    r.push(check("u_hat_ng", num(u_ng), true));
    r.push(check("delta_mu", num(delta_mu), true));
    r.push(check(
        "utility_bound_delta_mu",
        num(report.utility_bound_delta_mu),
        true,
    ));
    let bound_met = delta_mu <= report.utility_bound_delta_mu;
    r.push(check("utility_bound_met", bound_met, true));
    r.push(check(
        "ng_beats_ni",
        u_ng >= u_ni,
        !bound_met || u_ng >= u_ni,
    ));
    Ok(())
}

/// Summary of an `rl` run, also used by tests.
#[derive(Debug, Clone)]
pub struct RlOutcome {
    pub selected_seed: u64,
    pub sarsa: multistage::Evaluation<f64>,
    pub oracle: Option<multistage::Evaluation<f64>>,
}

/// Table whose greedy action at every state is `policy[s]`.
pub fn policy_table(policy: &[usize], n_actions: usize) -> TabularPolicy<f64> {
    let mut t = TabularPolicy::zeros(policy.len(), n_actions);
    for (s, &a) in policy.iter().enumerate() {
        t.action_values[s][a] = 1.0;
    }
    t
}

/// State-action pairs above which the value-iteration comparison is skipped.
const ORACLE_LIMIT: usize = 500_000;

pub fn rl(ctx: &Context, out: &Path) -> Result<RlOutcome, CliError> {
    let config = ctx.cfg.rl_config();
    let env = build_discrete_env(&ctx.params, &ctx.ladder, config, ctx.cfg.rl_mask())
        .map_err(|e| CliError::Config(format!("rl: {e}")))?;
    let base = ctx.cfg.run.seed;
    let tables: Vec<TabularPolicy<f64>> = (0..config.seeds)
        .into_par_iter()
        .map(|k| sarsa_train(&env, &config, base.wrapping_add(k as u64)))
        .collect();
    let tails: Vec<f64> = tables
        .iter()
        .map(|t| t.tail_reward(config.selection_window))
        .collect();
    let mut best = 0;
    for k in 1..tails.len() {
        if tails[k] > tails[best] {
            best = k;
        }
    }

    let mut tr = Table::new(&["seed", "episode", "mean_reward"]);
    for t in &tables {
        for (e, r) in t.episode_rewards.iter().enumerate() {
            tr.push(vec![t.seed.to_string(), e.to_string(), num(*r)]);
        }
    }
    tr.write(&out.join("training.csv"), &ctx.hash, "rl")?;

    let mut sel = Table::new(&["seed", "tail_reward", "selected"]);
    for (k, t) in tables.iter().enumerate() {
        sel.push(vec![
            t.seed.to_string(),
            num(tails[k]),
            (k == best).to_string(),
        ]);
    }
    sel.write(&out.join("selection.csv"), &ctx.hash, "rl")?;

    let chosen = &tables[best];
    let eval_h = ctx.cfg.rl.eval_horizon;
    let sarsa = evaluate_policy(chosen, &env, eval_h, base)?;
    let mut eff = Table::new(&["metric", "value"]);
    let mut push = |k: &str, v: String| eff.push(vec![k.to_string(), v]);
    push("selected_seed", chosen.seed.to_string());
    push("avg_improve_effort", num(sarsa.avg_improve_effort));
    push("avg_game_effort", num(sarsa.avg_game_effort));
    push("effort_gap", num(sarsa.effort_gap()));
    push("decision_maker_utility", num(sarsa.decision_maker_utility));
    push("avg_reward", num(sarsa.avg_reward));

    let mdp = &env.mdp;
    let oracle = if mdp.n_states * mdp.n_actions <= ORACLE_LIMIT && config.discount < 1.0 {
        let vi = value_iteration_oracle(mdp, config.discount, 1e-10)?;
        let greedy = chosen.greedy_policy();
        let v_sarsa = policy_value(mdp, &greedy, config.discount, 1e-10)?;
        let oracle_eval =
            evaluate_policy(&policy_table(&vi.policy, mdp.n_actions), &env, eval_h, base)?;
        let s0 = env.start_state();
        push("oracle_avg_reward", num(oracle_eval.avg_reward));
        push("oracle_effort_gap", num(oracle_eval.effort_gap()));
        push("oracle_start_value", num(vi.values[s0]));
        push("sarsa_start_value", num(v_sarsa[s0]));
        Some(oracle_eval)
    } else {
        None
    };
    eff.write(&out.join("effort.csv"), &ctx.hash, "rl")?;

    let q = multistage::rl::q_table_csv(chosen, &env);
    fs::write(
        out.join("q_table.csv"),
        format!("# config_hash={} command=rl\n{q}", ctx.hash),
    )?;
    Ok(RlOutcome {
        selected_seed: chosen.seed,
        sarsa,
        oracle,
    })
}

/// Runs the invariant checks on one configuration; fails if any does.
pub fn validate(ctx: &Context, out: &Path) -> Result<(), CliError> {
    let p = &ctx.params;
    let gamma = p.gamma();
    let mut r = Table::new(&["check", "value", "pass"]);
    let mut failed = Vec::new();
    let mut add = |r: &mut Table, name: &str, value: String, pass: bool| {
        if !pass {
            failed.push(name.to_string());
        }
        r.push(check(name, value, pass));
    };

    let classes = [
        ("first", &ctx.ng.first),
        ("middle", &ctx.ng.middle),
        ("terminal", &ctx.ng.terminal),
    ];
    for (name, w) in classes {
        add(
            &mut r,
            &format!("ng_window_valid_{name}"),
            num(w.w_bar),
            w.valid,
        );
        // The top level cannot promote, so only the lower classes are checked.
        if w.class != multistage::BoundaryClass::Terminal {
            let level = multistage::LevelSpec::of_class(w.class, 0.0);
            add(
                &mut r,
                &format!("ng_promotion_at_target_{name}"),
                num(w.w_bar),
                check_prop2(w, p, &level),
            );
        }
    }
    if let Some(ni) = &ctx.ni {
        for (name, w, g) in [
            ("first", &ni.first, &ctx.ng.first),
            ("middle", &ni.middle, &ctx.ng.middle),
            ("terminal", &ni.terminal, &ctx.ng.terminal),
        ] {
            add(
                &mut r,
                &format!("ni_window_valid_{name}"),
                num(w.w_bar),
                w.valid,
            );
            add(
                &mut r,
                &format!("ni_target_above_ng_{name}"),
                num(w.w_bar - g.w_bar),
                w.w_bar > g.w_bar,
            );
        }
    }
    add(
        &mut r,
        "ng_intermediate_above_terminal",
        num(ctx.ng.middle.w_bar - ctx.ng.terminal.w_bar),
        ctx.ng.middle.w_bar >= ctx.ng.terminal.w_bar,
    );

    let ng_w = ctx.ng.for_ladder(&ctx.ladder);
    let conditions = check_windows(&ng_w, gamma);
    // Not a failure: plenty of ladders are worth simulating without it.
    r.push(check("incremental_thresholding", conditions.all(), true));

    for i in 1..=ctx.ladder.len() {
        let level = ctx.ladder.level(i);
        for y in [-2.0, level.mu, level.mu + 0.5, level.mu + 5.0] {
            let pr = multistage::decision_probabilities(p, &level, y);
            let ok = (pr.total() - 1.0).abs() < 1e-12
                && pr.p_up >= 0.0
                && pr.p_down >= 0.0
                && pr.p_stay >= 0.0;
            add(
                &mut r,
                &format!("probabilities_level_{i}_y_{y}"),
                num(pr.total()),
                ok,
            );
        }
    }

    let sim = ctx.simulator()?;
    let h = ctx.cfg.run.horizon.min(500);
    let seed = ctx.cfg.run.seed;
    let same = |a: PolicyKind, b: PolicyKind| {
        let ta = sim.run_trial(a, h, seed, ctx.cfg.run.x0);
        let tb = sim.run_trial(b, h, seed, ctx.cfg.run.x0);
        ta == tb
    };
    add(
        &mut r,
        "mix_one_is_ng",
        h.to_string(),
        same(PolicyKind::Mix { rho: 1.0 }, PolicyKind::NoGaming),
    );
    add(
        &mut r,
        "mix_zero_is_ni",
        h.to_string(),
        same(PolicyKind::Mix { rho: 0.0 }, PolicyKind::NoImprovement),
    );
    add(
        &mut r,
        "repeat_is_identical",
        h.to_string(),
        same(PolicyKind::NoGaming, PolicyKind::NoGaming),
    );

    let x0 = ctx.cfg.run.x0.max(1.0);
    let idle = sim.run_trial(PolicyKind::Zero, 50, seed, x0);
    let decay_err = idle
        .iter()
        .map(|s| (s.state_before.attribute - x0 * gamma.powi(s.time as i32)).abs())
        .fold(0.0, f64::max);
    add(
        &mut r,
        "idle_decay",
        num(decay_err),
        decay_err <= 1e-12 * x0,
    );

    if let Some(ni) = &ctx.ni {
        let ni_w = ni.for_ladder(&ctx.ladder);
        let chain = build_ni_chain(p, &ctx.ladder, &ni_w)?;
        add(
            &mut r,
            "ni_chain_residual",
            num(chain.residual()),
            chain.residual() < 1e-10,
        );
        let bal = verify_detailed_balance(&chain, p, &ctx.ladder, &ni_w)?;
        add(
            &mut r,
            "ni_chain_balance",
            num(bal.max_residual()),
            bal.max_residual() < 1e-10,
        );
    }
    if conditions.all() {
        let chain = build_ng_chain(p, &ctx.ladder, &ng_w, ctx.cfg.stationary.depth)?;
        add(
            &mut r,
            "ng_chain_residual",
            num(chain.residual()),
            chain.residual() < 1e-10,
        );
        let bal = verify_detailed_balance(&chain, p, &ctx.ladder, &ng_w)?;
        add(
            &mut r,
            "ng_chain_balance",
            num(bal.max_residual()),
            bal.max_residual() < 1e-10,
        );
    }
    r.write(&out.join("validation.csv"), &ctx.hash, "validate")?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}
