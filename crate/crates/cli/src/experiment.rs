//! Runs a parsed configuration through the engines and assembles the report.

use serde::Serialize;

use dynclt::clt::{self, CltOptions, CltReport, CltVerdict};
use dynclt::cylinder::{combine, koopman, CombineOp};
use dynclt::forward::{self, ForwardApproximant};
use dynclt::gordin::{self, Decomposition, RegularizedVariance, Sigma2Series, COBOUNDARY_TOL};
use dynclt::{build_shift, ConditionReport, CylinderFunction, Error, Sidedness, TransitionModel};

use crate::config::{ExperimentConfig, Kind, ObservableSpec};

/// Bumped whenever a report field changes meaning or name.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONSISTENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

#[derive(Debug, Serialize)]
pub struct ModelSummary {
    pub alphabet_size: usize,
    pub stationary: Vec<f64>,
    pub irreducible: bool,
    pub period: usize,
    pub mixing: bool,
}

#[derive(Debug, Serialize)]
pub struct ProfilePoint {
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Default, Serialize)]
pub struct Sigma2Routes {
    pub series: Option<f64>,
    pub martingale_difference: Option<f64>,
    pub forward: Option<f64>,
    pub variance_profile: Vec<ProfilePoint>,
    pub extrapolated: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct GordinSection {
    pub decomposition: Option<Decomposition>,
    pub series: Option<Sigma2Series>,
    pub lambda_profile: Vec<RegularizedVariance>,
    pub coboundary_witness: Option<CylinderFunction>,
}

#[derive(Debug, Serialize)]
pub struct ForwardSection {
    pub approximant: Option<ForwardApproximant>,
    pub cross_identity: Option<f64>,
    pub approximation_defect: Vec<ProfilePoint>,
}

#[derive(Debug, Default, Serialize)]
pub struct ConditionsSection {
    pub thm2: Option<ConditionReport>,
    pub thm3: Option<ConditionReport>,
    pub thm5: Option<ConditionReport>,
}

/// An engine that refused its input because a hypothesis does not hold.
#[derive(Debug, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub model: ModelSummary,
    pub observable: CylinderFunction,
    pub sigma2: Sigma2Routes,
    pub gordin: Option<GordinSection>,
    pub forward: Option<ForwardSection>,
    pub conditions: Option<ConditionsSection>,
    pub clt: Option<CltReport>,
    pub failures: Vec<StageFailure>,
    pub exit_code: i32,
}

pub struct Outcome {
    pub report: Report,
    pub samples: Option<Vec<f64>>,
}

/// A configuration that cannot be run at all.
#[derive(Debug)]
pub struct RunError(pub String);

fn is_hypothesis_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotCentered(_) | Error::Diverging { .. } | Error::NonSummable { .. } | Error::DegenerateSigma(_)
    )
}

struct Runner {
    failures: Vec<StageFailure>,
    fatal: Option<String>,
}

impl Runner {
    /// Records a stage error: hypothesis violations become failures, anything else is fatal.
    fn stage<T>(&mut self, stage: &str, r: dynclt::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                if is_hypothesis_failure(&e) {
                    self.failures.push(StageFailure { stage: stage.to_string(), message: e.to_string() });
                } else if self.fatal.is_none() {
                    self.fatal = Some(format!("{stage}: {e}"));
                }
                None
            }
        }
    }
}

fn build_observable(model: &TransitionModel, spec: &ObservableSpec) -> dynclt::Result<CylinderFunction> {
    let m = model.alphabet_size();
    let need_binary = |name: &str| {
        if m != 2 {
            return Err(Error::Incompatible(format!("observable preset `{name}` needs a 2-state model")));
        }
        Ok(())
    };
    match spec {
        ObservableSpec::Rademacher => {
            need_binary("rademacher")?;
            Ok(CylinderFunction::rademacher(0))
        }
        ObservableSpec::CenteredIndicator => {
            let p0 = model.pi(0);
            CylinderFunction::from_fn(m, 0, 1, |w| if w[0] == 0 { 1.0 - p0 } else { -p0 })
        }
        ObservableSpec::Coboundary => {
            need_binary("coboundary")?;
            let r = CylinderFunction::rademacher(0);
            combine(model, &r, &koopman(&r), CombineOp::Sub, 1.0, 1.0)
        }
        ObservableSpec::Table { offset, length, values } => {
            CylinderFunction::new(m, *offset, *length, values.clone())
        }
    }
}

/// Runs every engine requested by `config.run.kind`.
pub fn run(config: ExperimentConfig) -> Result<Outcome, RunError> {
    let model = build_shift(&config.matrix, config.sidedness).map_err(|e| RunError(e.to_string()))?;
    let f = build_observable(&model, &config.observable).map_err(|e| RunError(e.to_string()))?;
    // Views of the same Markov measure for the two filtrations.
    let one = model.with_sidedness(Sidedness::OneSided);
    let two = model.with_sidedness(Sidedness::TwoSided);
    let f_one = if f.offset() < 0 { f.shifted(-f.offset()) } else { f.clone() };
    let run = &config.run;
    let kind = run.kind;
    let mut r = Runner { failures: Vec::new(), fatal: None };
    let mut sigma2 = Sigma2Routes::default();

    let wants_series = kind.includes(Kind::Gordin) || kind.includes(Kind::Clt);
    let series = if wants_series {
        r.stage("sigma2_series", gordin::sigma2_series(&one, &f_one, run.max_terms, run.tol))
    } else {
        None
    };
    sigma2.series = series.as_ref().map(|s| s.value);

    let decomposition = if wants_series {
        r.stage("decompose", gordin::decompose(&one, &f_one, run.tol))
    } else {
        None
    };
    sigma2.martingale_difference = decomposition.as_ref().map(|d| d.sigma2_mdiff);

    let gordin_section = kind.includes(Kind::Gordin).then(|| {
        let lambda_profile = if decomposition.is_some() {
            r.stage("sigma2_lambda", gordin::lambda_profile(&one, &f_one)).unwrap_or_default()
        } else {
            Vec::new()
        };
        let coboundary_witness = if decomposition.is_some() {
            r.stage("detect_coboundary", gordin::detect_coboundary(&one, &f_one, COBOUNDARY_TOL)).flatten()
        } else {
            None
        };
        GordinSection { decomposition: decomposition.clone(), series: series.clone(), lambda_profile, coboundary_witness }
    });

    let forward_section = kind.includes(Kind::Forward).then(|| {
        let approximant = r.stage("y0_sum", forward::y0_sum(&two, &f, run.r_max, run.tol));
        sigma2.forward = approximant.as_ref().map(|a| a.sigma2);
        if let Some(profile) = r.stage("variance_profile", forward::variance_profile(&two, &f, &run.n_grid)) {
            sigma2.variance_profile =
                run.n_grid.iter().zip(profile).map(|(&n, value)| ProfilePoint { n, value }).collect();
        }
        let top = *run.n_grid.last().expect("n_grid is non-empty");
        sigma2.extrapolated = r.stage("extrapolated_variance", forward::extrapolated_variance(&two, &f, top));
        let (cross_identity, approximation_defect) = match &approximant {
            Some(a) => {
                let radius = a.r_range.1 - a.r_range.0 + f.length() as i64;
                let cross = r.stage("cross_identity", forward::cross_identity(&two, &a.y0, &f, radius));
                let defect = r
                    .stage("approximation_defect", forward::approximation_defect(&two, &f, &a.y0, &run.n_grid))
                    .map(|d| run.n_grid.iter().zip(d).map(|(&n, value)| ProfilePoint { n, value }).collect())
                    .unwrap_or_default();
                (cross, defect)
            }
            None => (None, Vec::new()),
        };
        ForwardSection { approximant, cross_identity, approximation_defect }
    });

    let conditions = kind.includes(Kind::Conditions).then(|| {
        // F_0-measurable alignment for the forward checker: window ends at coordinate 0.
        let f_past = if f.is_constant() { f.clone() } else { f.shifted(-(f.end() - 1)) };
        ConditionsSection {
            thm2: r.stage("thm2", gordin::check_thm2_conditions(&one, &f_one, run.max_terms, run.tol)),
            thm3: r.stage(
                "thm3",
                gordin::check_thm3_conditions(&two, &f, run.alpha, run.k_max, run.max_terms, run.tol),
            ),
            thm5: r.stage("thm5", forward::check_thm5_conditions(&two, &f_past, run.k_max, run.tol)),
        }
    });

    let mut samples = None;
    let clt_report = if kind.includes(Kind::Clt) {
        match &series {
            Some(s) => {
                let sims = r.stage("simulate_birkhoff", clt::simulate_birkhoff(&one, &f_one, run.n, run.samples, run.seed));
                let bound = decomposition.as_ref().and_then(|_| {
                    gordin::detect_coboundary(&one, &f_one, COBOUNDARY_TOL)
                        .ok()
                        .flatten()
                        .map(|g| (f_one.sup_norm() + 2.0 * g.sup_norm()) / (run.n as f64).sqrt())
                });
                let options = CltOptions { coboundary_bound: bound, ..CltOptions::default() };
                let report = sims.as_ref().and_then(|x| r.stage("clt", clt::assess(x, s.value, run.n, run.seed, &options)));
                samples = sims;
                report.map(|mut rep| {
                    if let Some(d) = &decomposition {
                        if let Some(p) = r.stage(
                            "remainder_probability",
                            clt::remainder_probability(&one, &f_one, d.g(), &run.n_grid, run.eps, run.samples, run.seed),
                        ) {
                            rep.remainder_prob = Some(run.n_grid.iter().copied().zip(p).collect());
                        }
                    }
                    rep
                })
            }
            None => None,
        }
    } else {
        None
    };

    if let Some(msg) = r.fatal {
        return Err(RunError(msg));
    }

    let condition_fail = conditions.as_ref().is_some_and(|c| {
        [&c.thm2, &c.thm3, &c.thm5].iter().any(|rep| rep.as_ref().is_some_and(|x| x.any_fail()))
    });
    let inconsistent = clt_report
        .as_ref()
        .is_some_and(|c| c.verdict == CltVerdict::Inconsistent || c.bound_check == Some(false));
    let exit_code = if condition_fail || !r.failures.is_empty() {
        EXIT_HYPOTHESIS
    } else if inconsistent {
        EXIT_INCONSISTENT
    } else {
        EXIT_OK
    };

    let class = model.ergodic_class();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        model: ModelSummary {
            alphabet_size: model.alphabet_size(),
            stationary: model.stationary().to_vec(),
            irreducible: class.irreducible,
            period: class.period,
            mixing: class.is_mixing(),
        },
        observable: f.clone(),
        sigma2,
        gordin: gordin_section,
        forward: forward_section,
        conditions,
        clt: clt_report,
        failures: r.failures,
        exit_code,
        config,
    };
    Ok(Outcome { report, samples })
}
