//! One runner per subcommand; each delegates to a single library operation.

use mpl_core::continuous::{
    continuous_duality_check, continuous_duality_report, continuous_mutual_pressure,
    mc_value_continuous, quadrature_pressure, quantile_sample, MarginalSpec,
};
use mpl_core::measures::mutual_information_by_entropies;
use mpl_core::microstates::DEFAULT_BUDGET;
use mpl_core::sanov::lemma31_check;
use mpl_core::{
    duality_report, equilibrium_check, finite_n_value, gibbs_measure, i_sym, marginal_potential,
    marginals, mc_value, mutual_information, mutual_pressure_limit, pressure, product_measure,
    relative_entropy, shannon_entropy, verify_legendre, Error, Estimate64, Masses, Pmf,
};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, MethodChoice, DEFAULT_SAMPLES, DEFAULT_TRIALS};
use crate::report::Quantity;
use crate::CliError;

#[derive(Debug, Default)]
pub struct Outcome {
    pub quantities: Vec<Quantity>,
    pub details: Value,
    pub agreement: Option<Value>,
}

pub fn dispatch(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Entropy => entropy(cfg),
        Command::Pressure => run_pressure(cfg),
        Command::Gibbs => gibbs(cfg),
        Command::MutualPressure => run_mutual_pressure(cfg),
        Command::Duality => duality(cfg),
        Command::Legendre => legendre(cfg),
        Command::Equilibrium => equilibrium(cfg),
        Command::Sanov => sanov(cfg),
        Command::Continuous => continuous(cfg),
    }
}

fn label(prefix: &str, i: usize) -> String {
    format!("{prefix}[{i}]")
}

fn entropy(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = cfg.joint()?;
    let mut q = vec![Quantity::new("entropy", shannon_entropy(&mu), "exact")];
    for (i, m) in marginals(&mu).iter().enumerate() {
        q.push(Quantity::new(label("marginal_entropy", i), shannon_entropy(m), "exact"));
    }
    q.push(Quantity::new("mutual_information", mutual_information(&mu), "exact"));
    if let Some(r) = cfg.reference()? {
        let kl = relative_entropy(&mu, &r)?.to_f64_lossy();
        q.push(Quantity::new("relative_entropy", kl, "exact"));
    }
    Ok(Outcome {
        quantities: q,
        details: json!({ "shape": mu.shape() }),
        agreement: None,
    })
}

fn run_pressure(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let h = cfg.potential()?;
    Ok(Outcome {
        quantities: vec![Quantity::new("pressure", pressure(&h), "exact")],
        details: json!({ "shape": h.shape(), "sup_norm": h.sup_norm() }),
        agreement: None,
    })
}

fn gibbs(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let h = cfg.potential()?;
    let mu = gibbs_measure(&h);
    let mut q = vec![Quantity::new("pressure", pressure(&h), "exact")];
    for i in 0..h.arity() {
        let alphabet = &h.alphabets()[i];
        for (t, v) in marginal_potential(&h, i)?.into_iter().enumerate() {
            q.push(Quantity::new(
                format!("marginal_potential[{i}][{}]", alphabet.label(t)),
                v,
                "exact",
            ));
        }
    }
    let marg: Vec<Vec<f64>> = marginals(&mu).iter().map(|m| m.weights().to_vec()).collect();
    Ok(Outcome {
        quantities: q,
        details: json!({
            "shape": h.shape(),
            "alphabets": h.alphabets().iter().map(|a| a.symbols().to_vec()).collect::<Vec<_>>(),
            "weights": mu.weights().iter().copied().collect::<Vec<f64>>(),
            "marginals": marg,
        }),
        agreement: None,
    })
}

fn estimate_row(name: &str, e: &Estimate64, method: &str) -> Quantity {
    Quantity::new(name, e.value, method)
        .with_stderr(e.std_error)
        .with_n(e.sample_size)
}

fn estimate_details(e: &Estimate64) -> Value {
    json!({
        "iterations": e.iterations,
        "marginal_residual": e.marginal_residual,
        "mc_samples": e.mc_samples,
        "tensors_visited": e.tensors_visited,
    })
}

fn run_mutual_pressure(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let h = cfg.potential()?;
    let mus = cfg.marginals(Some(&h))?;
    let method = cfg.method.unwrap_or(MethodChoice::Limit);
    let budget = cfg.budget.unwrap_or(DEFAULT_BUDGET);
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let run_exact = || finite_n_value(&h, &mus, cfg.n.expect("validated"), budget);
    let run_mc = || mc_value(&h, &mus, cfg.n.expect("validated"), samples, cfg.seed());
    let run_limit = || mutual_pressure_limit(&h, &mus, cfg.tol());

    let mut out = Outcome::default();
    let mut details = serde_json::Map::new();
    match method {
        MethodChoice::Exact => {
            let e = run_exact()?;
            out.quantities.push(estimate_row("mutual_pressure", &e, "exact"));
            details.insert("exact".into(), estimate_details(&e));
        }
        MethodChoice::Mc => {
            let e = run_mc()?;
            out.quantities.push(estimate_row("mutual_pressure", &e, "mc"));
            details.insert("mc".into(), estimate_details(&e));
        }
        MethodChoice::Limit => {
            let e = run_limit()?;
            out.quantities.push(estimate_row("mutual_pressure", &e, "limit"));
            details.insert("limit".into(), estimate_details(&e));
        }
        MethodChoice::All => {
            let exact = match run_exact() {
                Ok(e) => Ok(e),
                Err(Error::BudgetExceeded { budget }) => Err(budget),
                Err(e) => return Err(e.into()),
            };
            let mc = run_mc()?;
            let limit = run_limit()?;
            let mut agreement = serde_json::Map::new();
            match &exact {
                Ok(e) => {
                    out.quantities.push(estimate_row("mutual_pressure", e, "exact"));
                    details.insert("exact".into(), estimate_details(e));
                    let se = mc.std_error.unwrap_or(0.0);
                    let diff = (e.value - mc.value).abs();
                    agreement.insert("exact_minus_mc".into(), json!(e.value - mc.value));
                    agreement.insert(
                        "exact_mc_sigmas".into(),
                        json!(if se > 0.0 { Some(diff / se) } else { None }),
                    );
                    agreement.insert("exact_mc_agree_3sigma".into(), json!(diff <= 3.0 * se + 1e-12));
                    agreement.insert("exact_minus_limit".into(), json!(e.value - limit.value));
                }
                Err(b) => {
                    agreement.insert(
                        "exact_skipped".into(),
                        json!(format!("enumeration budget of {b} tensors exceeded")),
                    );
                }
            }
            out.quantities.push(estimate_row("mutual_pressure", &mc, "mc"));
            out.quantities.push(estimate_row("mutual_pressure", &limit, "limit"));
            details.insert("mc".into(), estimate_details(&mc));
            details.insert("limit".into(), estimate_details(&limit));
            agreement.insert("mc_minus_limit".into(), json!(mc.value - limit.value));
            out.agreement = Some(Value::Object(agreement));
        }
    }
    out.details = Value::Object(details);
    Ok(out)
}

fn duality(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let h = cfg.potential()?;
    let mus = cfg.marginals(Some(&h))?;
    let r = duality_report(&h, &mus)?;
    let mut q = vec![
        Quantity::new("pressure", r.pressure, "exact"),
        Quantity::new("mutual_pressure", r.mutual_pressure, "limit"),
        Quantity::new("entropy_sum", r.entropy_sum, "exact"),
        Quantity::new("gap", r.gap, "limit"),
    ];
    for (i, d) in r.marginal_distances.iter().enumerate() {
        q.push(Quantity::plain(label("marginal_distance", i), *d, "exact"));
    }
    Ok(Outcome {
        quantities: q,
        details: json!({ "marginals": pmf_weights(&mus) }),
        agreement: None,
    })
}

fn pmf_weights(mus: &[Pmf<f64>]) -> Vec<Vec<f64>> {
    mus.iter().map(|m| m.weights().to_vec()).collect()
}

fn legendre(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = cfg.joint()?;
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let kl = relative_entropy(&mu, &product_measure(&marginals(&mu))?)?.to_f64_lossy();
    let sup = verify_legendre(&mu, trials, cfg.seed())?;
    Ok(Outcome {
        quantities: vec![
            Quantity::new("i_sym", i_sym(&mu), "exact"),
            Quantity::new("entropy_defect", mutual_information_by_entropies(&mu), "exact"),
            Quantity::new("relative_entropy_to_product", kl, "exact"),
            Quantity::new("legendre_transform", sup, "limit"),
        ],
        details: json!({ "shape": mu.shape(), "trials": trials }),
        agreement: None,
    })
}

fn equilibrium(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let h = cfg.potential()?;
    let mu = cfg.joint()?;
    let r = equilibrium_check(&h, &mu, cfg.tol())?;
    let mut q = vec![
        Quantity::new("i_sym", r.i_sym, "exact"),
        Quantity::new("tilted_value", r.tilted_value, "limit"),
        Quantity::new("equality_defect", r.equality_defect, "limit"),
    ];
    for (i, d) in r.marginal_distances.iter().enumerate() {
        q.push(Quantity::plain(label("marginal_distance", i), *d, "exact"));
    }
    Ok(Outcome {
        quantities: q,
        details: json!({ "holds": r.holds }),
        agreement: None,
    })
}

fn sanov(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let s = cfg.sanov.as_ref().expect("validated");
    let mu0 = Pmf::from_weights(s.reference.clone())?;
    let mu1 = Pmf::from_weights(s.target.clone())?;
    let r = lemma31_check(&mu0, &mu1, s.delta, &s.ns, cfg.tol())?;
    let mut q: Vec<Quantity> = r
        .rows
        .iter()
        .map(|row| Quantity::new("log_prob", row.log_prob.to_f64_lossy(), "exact").with_n(Some(row.n)))
        .collect();
    q.push(Quantity::new("rate", r.rate.to_f64_lossy(), "limit"));
    Ok(Outcome {
        quantities: q,
        details: json!({
            "clause_a": r.clause_a,
            "clause_b": r.clause_b,
            "passed": r.passed(),
        }),
        agreement: None,
    })
}

fn continuous(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let c = cfg.continuous.as_ref().expect("validated");
    let h = c.potential()?;
    let order = c.order();
    let levels = c.levels();
    let method = cfg.method.unwrap_or(MethodChoice::Limit);
    let p = quadrature_pressure(&h, order)?;
    let mut out = Outcome::default();
    out.quantities.push(Quantity::new("pressure", p.value, "quadrature"));
    out.quantities.push(Quantity::new("pressure_error_estimate", p.error_estimate, "quadrature"));
    let mut details = serde_json::Map::new();
    details.insert("order".into(), json!(order));
    details.insert("levels".into(), json!(levels));

    let Some(mus) = c.marginals()? else {
        let r = continuous_duality_check(&h, order, levels)?;
        push_duality(&mut out.quantities, &r);
        details.insert("marginals".into(), json!("gibbs"));
        out.details = Value::Object(details);
        return Ok(out);
    };

    let mut limit_value = None;
    if method != MethodChoice::Mc {
        let r = continuous_mutual_pressure(&h, &mus, levels, cfg.tol())?;
        for t in &r.trace {
            out.quantities
                .push(Quantity::new(format!("mutual_pressure[levels={}]", t.levels), t.value, "limit"));
        }
        out.quantities.push(Quantity::new("mutual_pressure", r.estimate.value, "limit"));
        out.quantities.push(Quantity::new("refinement_error_proxy", r.error_proxy, "limit"));
        details.insert("cauchy".into(), json!(r.cauchy));
        details.insert("limit".into(), estimate_details(&r.estimate));
        limit_value = Some(r.estimate.value);
        if mus.iter().all(|m| matches!(m, MarginalSpec::Grid(_))) {
            let d = continuous_duality_report(&h, &mus, order, levels)?;
            out.quantities.push(Quantity::new("entropy_sum", d.entropy_sum, "quadrature"));
            out.quantities.push(Quantity::new("gap", d.gap, "limit"));
            for (i, t) in d.marginal_distances.iter().enumerate() {
                out.quantities.push(Quantity::plain(label("gibbs_marginal_distance", i), *t, "quadrature"));
            }
        }
    }
    if matches!(method, MethodChoice::Mc | MethodChoice::All) {
        let n = cfg.n.expect("validated");
        let xis = mus
            .iter()
            .map(|m| quantile_sample(m, n))
            .collect::<mpl_core::Result<Vec<_>>>()?;
        let e = mc_value_continuous(&h, &xis, cfg.samples.unwrap_or(DEFAULT_SAMPLES), cfg.seed())?;
        out.quantities.push(estimate_row("mutual_pressure", &e, "mc"));
        details.insert("mc".into(), estimate_details(&e));
        if let Some(l) = limit_value {
            out.agreement = Some(json!({ "mc_minus_limit": e.value - l }));
        }
    }
    out.details = Value::Object(details);
    Ok(out)
}

fn push_duality(q: &mut Vec<Quantity>, r: &mpl_core::DualityReport64) {
    q.push(Quantity::new("mutual_pressure", r.mutual_pressure, "limit"));
    q.push(Quantity::new("entropy_sum", r.entropy_sum, "quadrature"));
    q.push(Quantity::new("gap", r.gap, "limit"));
    for (i, t) in r.marginal_distances.iter().enumerate() {
        q.push(Quantity::plain(label("gibbs_marginal_distance", i), *t, "quadrature"));
    }
}
