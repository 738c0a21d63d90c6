//! Named experiments behind the command-line runner.
//!
//! Every experiment reads string parameters, draws all randomness from the
//! configured seed and returns a [`Report`]. Identical configurations give
//! identical reports.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::report::{format_float, Format, Report, Table};
use crate::{diracprop, exchange, haarlab, kreinfock, linalg, mixing, repcomb, wickengine};

/// Registered experiments, as `subcommand words joined by "-"`.
pub const EXPERIMENTS: &[&str] = &[
    "repcomb",
    "haar-fluct",
    "haar-det",
    "mixing-verify",
    "dirac-glue",
    "fock-verify",
    "wick-vev",
    "exchange-scan",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), params: BTreeMap::new(), seed: 0, out: None, format: Format::Json }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }
}

/// Parse a flat `key=value` file; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {} is not key=value: {raw:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Usage(format!("config line {} has an empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Typed access to the parameter map; remembers which keys were read.
struct Params<'a> {
    map: &'a BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, String>) -> Self {
        Self { map, used: RefCell::new(BTreeSet::new()) }
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.used.borrow_mut().insert(key.into());
        match self.map.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Usage(format!("invalid value {s:?} for parameter {key}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>> {
        self.used.borrow_mut().insert(key.into());
        let raw = self.map.get(key).map(String::as_str).unwrap_or(default);
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Usage(format!("invalid entry {s:?} in parameter {key}"))))
            .collect()
    }

    fn rational(&self, key: &str, default: &str) -> Result<BigRational> {
        let raw: String = self.get(key, default.to_string())?;
        raw.parse().map_err(|_| Error::Usage(format!("parameter {key} must be a rational like 3/4, got {raw:?}")))
    }

    /// Echo of all parameters read, with defaults filled in.
    fn finish(&self, defaults: &[(&str, String)]) -> Result<BTreeMap<String, String>> {
        let used = self.used.borrow();
        if let Some(k) = self.map.keys().find(|k| !used.contains(*k)) {
            return Err(Error::Usage(format!("unknown parameter {k}")));
        }
        let mut echo: BTreeMap<String, String> = defaults.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        for (k, v) in self.map {
            echo.insert(k.clone(), v.clone());
        }
        Ok(echo)
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let p = Params::new(&config.params);
    let seed = config.seed;
    let mut report = match config.experiment.as_str() {
        "repcomb" => run_repcomb(&p)?,
        "haar-fluct" => run_haar_fluct(&p, seed)?,
        "haar-det" => run_haar_det(&p, seed)?,
        "mixing-verify" => run_mixing(&p, seed)?,
        "dirac-glue" => run_dirac(&p)?,
        "fock-verify" => run_fock(&p, seed)?,
        "wick-vev" => run_wick(&p)?,
        "exchange-scan" => run_exchange(&p)?,
        other => {
            return Err(Error::Usage(format!(
                "unknown experiment {other:?}; registered: {}",
                EXPERIMENTS.join(", ")
            )))
        }
    };
    report.params.insert("seed".into(), seed.to_string());
    report.duration = Some(start.elapsed());
    log::info!("{} finished in {:?}", config.experiment, start.elapsed());
    Ok(report)
}

fn echo(p: &Params, keys: &[(&str, String)]) -> Result<BTreeMap<String, String>> {
    p.finish(keys)
}

fn run_repcomb(p: &Params) -> Result<Report> {
    let pp: usize = p.get("p", 2)?;
    let n: usize = p.get("n", 2)?;
    let exclude: bool = p.get("exclude_as", true)?;
    let params = echo(p, &[("p", pp.to_string()), ("n", n.to_string()), ("exclude_as", exclude.to_string())])?;
    let fr = repcomb::fluct_sum(pp, n, exclude).map_err(usage_if_arg)?;
    let mut r = Report::new("repcomb", params);
    let mut table = Table::new(&["diagram", "hook_product", "multiplicity", "dim", "summand_num", "summand_den"]);
    for (lambda, term) in &fr.summands {
        table.push(vec![
            lambda.to_string(),
            repcomb::hook_lengths(lambda).product().to_string(),
            repcomb::multiplicity(lambda)?.to_string(),
            repcomb::dim_irrep(lambda, n)?.to_string(),
            term.numer().to_string(),
            term.denom().to_string(),
        ]);
        r.rational(&format!("summand {lambda}"), term);
    }
    r.table = Some(table);
    r.rational("fluct_sum", fr.value());
    r.rational("total", &fr.total);
    r.int("diagrams", fr.summands.len() as u64);
    r.verdict("schur_weyl", repcomb::schur_weyl_check(pp, n).is_ok());
    Ok(r)
}

fn usage_if_arg(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) | Error::OutOfScope(m) => Error::Usage(m),
        other => other,
    }
}

fn run_haar_fluct(p: &Params, seed: u64) -> Result<Report> {
    let n: usize = p.get("n", 64)?;
    let pp: usize = p.get("p", 4)?;
    let trials: usize = p.get("trials", 200)?;
    let ls: Vec<usize> = p.list("l", "16,64,256")?;
    let params = echo(
        p,
        &[("n", n.to_string()), ("p", pp.to_string()), ("trials", trials.to_string()), ("l", "16,64,256".into())],
    )?;
    let mut r = Report::new("haar-fluct", params);
    let mut table = Table::new(&["L", "mean_sq", "std_error", "ratio"]);
    let mut max_ratio = 0.0f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &l) in ls.iter().enumerate() {
        let est = haarlab::prop51_experiment(n, pp, l, trials, seed.wrapping_add(i as u64)).map_err(usage_if_arg)?;
        max_ratio = max_ratio.max(est.ratio());
        xs.push(l as f64);
        ys.push(est.mean_sq);
        table.push(vec![l.to_string(), format_float(est.mean_sq), format_float(est.std_error), format_float(est.ratio())]);
        if i + 1 == ls.len() {
            r.float("mean_sq", est.mean_sq);
            r.float("std_error", est.std_error);
            r.float("bound", est.theoretical_bound);
        }
    }
    r.table = Some(table);
    r.float("max_ratio", max_ratio);
    r.verdict("ratio_at_most_4", max_ratio <= 4.0);
    if ls.len() >= 2 {
        let slope = linalg::loglog_slope(&xs, &ys);
        r.float("slope", slope);
        r.verdict("slope_near_minus_one", (slope + 1.0).abs() <= 0.2);
    }
    Ok(r)
}

fn run_haar_det(p: &Params, seed: u64) -> Result<Report> {
    let n: usize = p.get("n", 8)?;
    let l: usize = p.get("l", 64)?;
    let trials: usize = p.get("trials", 100)?;
    let params = echo(p, &[("n", n.to_string()), ("l", l.to_string()), ("trials", trials.to_string())])?;
    let (det, sub) = haarlab::prop52_experiment(n, l, trials, seed).map_err(usage_if_arg)?;
    let mut r = Report::new("haar-det", params);
    let lf = l as f64;
    r.float("mean_sq", det.mean_sq);
    r.float("std_error", det.std_error);
    r.float("bound", det.theoretical_bound);
    r.float("det_term", det.mean_sq);
    r.float("det_term_times_l", det.mean_sq * lf);
    r.float("subtracted_term", sub.mean_sq);
    r.float("subtracted_term_times_nl", sub.mean_sq * n as f64 * lf);
    r.verdict("det_term_within_factor_2", det.mean_sq >= 0.5 / lf && det.mean_sq <= 2.0 / lf);
    r.verdict("subtracted_term_bounded", sub.mean_sq <= 4.0 / (n as f64 * lf));
    Ok(r)
}

fn run_mixing(p: &Params, seed: u64) -> Result<Report> {
    let n: usize = p.get("n", 2)?;
    let f: usize = p.get("f", 12)?;
    let draws: usize = p.get("draws", 20)?;
    let params = echo(p, &[("n", n.to_string()), ("f", f.to_string()), ("draws", draws.to_string())])?;
    let mut r = Report::new("mixing-verify", params);
    let (mut overlap, mut forms, mut defect) = (0.0f64, 0.0f64, 0.0f64);
    for d in 0..draws as u64 {
        let mut rng = linalg::stream_rng(seed, d);
        let split = mixing::SubspaceSplit::random(f, n, &mut rng).map_err(usage_if_arg)?;
        let w = haarlab::haar_unitary(n, &mut rng);
        let u = haarlab::haar_unitary(f - n, &mut rng);
        let v = mixing::build_v(&split, &w, &u)?;
        let v2 = mixing::build_v_projector_form(&split, &w, &u)?;
        let i0 = split.i0();
        overlap = overlap.max(linalg::max_abs(&(i0.adjoint() * &v.v * &i0)));
        forms = forms.max(linalg::max_abs_diff(&v.v, &v2.v));
        defect = defect.max(linalg::unitarity_defect(&v.v));
    }
    let mut rng = linalg::stream_rng(seed, draws as u64);
    let toy = mixing::ToyProjector::random(24, 4, 3, vec![0.0, 0.7, 1.9], &mut rng)?;
    let rank = mixing::rank_preservation(&toy);
    r.float("max_overlap_on_i0", overlap);
    r.float("max_form_difference", forms);
    r.float("max_unitarity_defect", defect);
    r.int("toy_rank", rank.rank as u64);
    r.int("toy_expected_rank", rank.expected as u64);
    r.verdict("overlap_vanishes", overlap <= 1e-12);
    r.verdict("forms_agree", forms <= 1e-12);
    r.verdict("unitary", defect <= 1e-12);
    r.verdict("rank_preserved", rank.pass);
    Ok(r)
}

fn run_dirac(p: &Params) -> Result<Report> {
    let nx: usize = p.get("nx", 256)?;
    let ell: f64 = p.get("ell", 16.0)?;
    let m: f64 = p.get("mass", 1.0)?;
    let t: f64 = p.get("t", 2.0)?;
    let dt: f64 = p.get("dt", 1e-5)?;
    let order: usize = p.get("order", 1)?;
    let strength: f64 = p.get("bstrength", 0.1)?;
    let halvings = format!("{},{},{}", strength, strength / 2.0, strength / 4.0);
    let amps: Vec<f64> = p.list("amps", &halvings)?;
    let params = echo(
        p,
        &[
            ("nx", nx.to_string()),
            ("ell", ell.to_string()),
            ("mass", m.to_string()),
            ("t", t.to_string()),
            ("dt", dt.to_string()),
            ("order", order.to_string()),
            ("bstrength", strength.to_string()),
            ("amps", halvings.clone()),
        ],
    )?;
    if order > 1 {
        return Err(Error::Unsupported(format!("glueing order {order}; only orders 0 and 1 are implemented")));
    }
    let amps = if order == 0 { Vec::new() } else { amps };
    let lat = diracprop::SpaceTimeLattice::with_period(nx, ell, dt).map_err(usage_if_arg)?;
    let report = glue_report(&lat, m, t, &amps)?;
    let mut r = Report::new("dirac-glue", params);
    r.float("free_forward_residual", report.free.forward);
    r.float("free_retarded_residual", report.free.retarded);
    r.float("equal_time_delta", report.equal_time_delta);
    if !amps.is_empty() {
        let mut table = Table::new(&["amplitude", "forward_residual", "retarded_residual"]);
        for (a, g) in amps.iter().zip(&report.first_order) {
            table.push(vec![format_float(*a), format_float(g.forward), format_float(g.retarded)]);
        }
        r.table = Some(table);
    }
    r.verdict("free_residual_small", report.free.forward <= 1e-6 && report.free.retarded <= 1e-6);
    r.verdict("equal_time_delta", report.equal_time_delta <= 1e-8);
    if let Some((fwd, ret)) = report.exponents {
        r.float("forward_exponent", fwd);
        r.float("retarded_exponent", ret);
        r.verdict("quadratic_remainder", (fwd - 2.0).abs() <= 0.3 && (ret - 2.0).abs() <= 0.3);
    }
    Ok(r)
}

/// Glueing residuals for a Gaussian packet and a Gaussian scalar potential.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueReport {
    pub free: diracprop::GlueResidual,
    pub first_order: Vec<diracprop::GlueResidual>,
    /// Log-log slopes of the forward and retarded residuals against the amplitude.
    pub exponents: Option<(f64, f64)>,
    pub equal_time_delta: f64,
}

pub fn glue_report(lat: &diracprop::SpaceTimeLattice, m: f64, t: f64, amps: &[f64]) -> Result<GlueReport> {
    use diracprop::*;
    let center = 0.5 * lat.ell();
    let phi = SpinorField::gaussian(lat, center, 4.0 * lat.a, 0.5, [linalg::ONE, linalg::ZERO]);
    let free = glueing_check(&phi, &Potential::zero(lat), m, lat, 0.0, t, 0)?;
    let mut first_order = Vec::with_capacity(amps.len());
    for &a in amps {
        let b = Potential::gaussian_scalar(lat, a, center, 0.0625 * lat.ell());
        first_order.push(glueing_check(&phi, &b, m, lat, 0.0, t, 1)?);
    }
    let exponents = (amps.len() >= 2).then(|| {
        let f: Vec<f64> = first_order.iter().map(|g| g.forward).collect();
        let rr: Vec<f64> = first_order.iter().map(|g| g.retarded).collect();
        (linalg::loglog_slope(amps, &f), linalg::loglog_slope(amps, &rr))
    });
    let k = free_kernels(m, lat, 0.0, 0.0)?;
    let dim = lat.dim();
    let lhs = k.k_m.matrix * gamma0_block(lat) * linalg::c(2.0 * std::f64::consts::PI, 0.0);
    let delta = linalg::max_abs_diff(&lhs, &(linalg::CMat::identity(dim, dim) * linalg::c(1.0 / lat.a, 0.0)));
    Ok(GlueReport { free, first_order, exponents, equal_time_delta: delta })
}

fn run_fock(p: &Params, seed: u64) -> Result<Report> {
    let sites: usize = p.get("sites", 1)?;
    let spinors: usize = p.get("spinors", 2)?;
    let n: usize = p.get("n", 2)?;
    let a: f64 = p.get("a", 0.5)?;
    let lambda: f64 = p.get("lambda", 0.7)?;
    let params = echo(
        p,
        &[
            ("sites", sites.to_string()),
            ("spinors", spinors.to_string()),
            ("n", n.to_string()),
            ("a", a.to_string()),
            ("lambda", lambda.to_string()),
        ],
    )?;
    let rep = fock_report(sites, spinors, n, a, lambda, seed).map_err(usage_if_arg)?;
    let mut r = Report::new("fock-verify", params);
    r.float("projector_idempotence", rep.projector);
    r.float("lemma_deviation", rep.lemma);
    r.float("heff_two_term", rep.heff.two_term);
    r.float("heff_combined", rep.heff.combined);
    r.float("car_falling", rep.car_falling);
    r.float("car_binomial", rep.car_binomial);
    r.float("recovery_deviation", rep.recovery.deviation);
    r.float("recovery_phase_re", rep.recovery.phase_with_prefactor.re);
    r.float("recovery_phase_im", rep.recovery.phase_with_prefactor.im);
    let tol = 1e-12;
    r.verdict("projector", rep.projector <= tol);
    r.verdict("lemma", rep.lemma <= tol);
    r.verdict("heff", rep.heff.two_term <= tol && rep.heff.combined <= tol);
    r.verdict("anticommutator", rep.car_falling <= tol);
    r.verdict("recovery", rep.recovery.deviation <= tol && (rep.recovery.phase_with_prefactor - linalg::ONE).norm() <= tol);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockReport {
    pub projector: f64,
    pub lemma: f64,
    pub heff: kreinfock::HeffReport,
    /// Largest anticommutator deviation over all chain steps with each weighting.
    pub car_falling: f64,
    pub car_binomial: f64,
    pub recovery: kreinfock::RecoveryReport,
}

pub fn fock_report(sites: usize, spinors: usize, n: usize, a: f64, lambda: f64, seed: u64) -> Result<FockReport> {
    use kreinfock::*;
    let space = SlotSpace::new(sites, spinors, a)?;
    let mut rng = linalg::stream_rng(seed, 0);
    let psi = SectorState::random(space, n, &mut rng)?;
    let once = project_effective(&psi);
    let twice = project_effective(&once);
    let projector = linalg::vec_max_abs_diff(&once.data, &twice.data);
    let lemma = lemma_eff_check(space, n)?;
    let fields = CoefficientFields::random(space, n, &mut rng);
    let heff = effective_hamiltonian_check(space, n, &fields, lambda)?;
    let chain = SectorChain::new(FockSpace::new(space, n)?)?;
    let (mut car_falling, mut car_binomial) = (0.0f64, 0.0f64);
    for p in 1..=n {
        car_falling = car_falling.max(car_on_chain(&chain, p, ChainWeights::Falling)?.max_deviation());
        car_binomial = car_binomial.max(car_on_chain(&chain, p, ChainWeights::Binomial)?.max_deviation());
    }
    let factors: Vec<linalg::CVec> = (0..n).map(|_| linalg::random_vector(space.dim(), &mut rng)).collect();
    let recovery = wavefunction_recovery(space, &factors)?;
    Ok(FockReport { projector, lemma: lemma.max_deviation.max(lemma.spread), heff, car_falling, car_binomial, recovery })
}

fn run_wick(p: &Params) -> Result<Report> {
    let word_file: String = p.get("spec", String::new())?;
    if !word_file.is_empty() {
        return run_wick_word(p, &word_file);
    }
    let n: usize = p.get("n", 3)?;
    let lambda = p.rational("lambda", "3/4")?;
    let ins: Vec<usize> = p.list("in_lines", "3,2,2")?;
    let outs: Vec<usize> = p.list("out_lines", "1,1,2")?;
    let ell: u32 = p.get("ell", 2)?;
    let params = echo(
        p,
        &[
            ("n", n.to_string()),
            ("lambda", "3/4".into()),
            ("in_lines", "3,2,2".into()),
            ("out_lines", "1,1,2".into()),
            ("ell", ell.to_string()),
        ],
    )?;
    let ctx = wickengine::Context::new(n, lambda.clone()).map_err(usage_if_arg)?;
    let table = wickengine::effective_commutators(&ctx)?;
    let limits = wickengine::limit_commutators(&lambda)?;
    let mut r = Report::new("wick-vev", params);
    let mut t = Table::new(&["n", "commutator", "derived", "stated", "ratio"]);
    let ratio = |e: &wickengine::CommutatorEntry| e.ratio.as_ref().map(|q| q.to_string()).unwrap_or_else(|| "none".into());
    for e in &table.entries {
        t.push(vec![n.to_string(), e.name.clone(), e.derived.to_string(), e.stated.to_string(), ratio(e)]);
        r.verdict(&format!("finite_n {}", e.name), e.matches());
    }
    for e in &limits.entries {
        t.push(vec!["inf".into(), e.name.clone(), e.derived.to_string(), e.stated.to_string(), ratio(e)]);
        r.verdict(&format!("limit {}", e.name), e.matches());
    }
    r.table = Some(t);
    let bb = &table.entries[0];
    r.text("bb_commutator", bb.derived.to_string());
    r.verdict("tau_cancellation", !bb.derived.depends_on_tau());
    let perms = wickengine::boson_pairing_permutations(&ins, &outs).map_err(usage_if_arg)?;
    r.int("pairing_permutations", perms.len() as u64);
    let lc = wickengine::loop_coefficient(ell, Some(n as u64)).map_err(usage_if_arg)?;
    let ll = wickengine::loop_coefficient(ell, None)?;
    r.rational("loop_coefficient", &lc.value);
    r.rational("loop_coefficient_limit", &ll.value);
    r.text("loop_limit_discrepancy", ll.limit_discrepancy.to_string());
    Ok(r)
}

/// Vacuum expectation of the time-ordered word read from `path`.
fn run_wick_word(p: &Params, path: &str) -> Result<Report> {
    let n: usize = p.get("n", 3)?;
    let lambda = p.rational("lambda", "3/4")?;
    let params = echo(p, &[("n", n.to_string()), ("lambda", "3/4".into())])?;
    let text = std::fs::read_to_string(path)?;
    let word = wickengine::OperatorWord::parse(&text).map_err(usage_if_arg)?;
    let ctx = wickengine::Context::new(n, lambda).map_err(usage_if_arg)?;
    let vev = wickengine::normal_order_vev_in(&word, &ctx).map_err(usage_if_arg)?;
    let mut r = Report::new("wick-vev", params);
    r.int("operators", word.symbols.len() as u64);
    r.int("terms", vev.sum.len() as u64);
    r.int("pairings", vev.pairings.len() as u64);
    r.text("vev", vev.sum.to_string());
    r.verdict("word_parsed", true);
    Ok(r)
}

fn run_exchange(p: &Params) -> Result<Report> {
    let ell_m: f64 = p.get("ell", 20.0)?;
    let m: f64 = p.get("mass", 1.0)?;
    let nu: f64 = p.get("nu", 1.0)?;
    let dt: f64 = p.get("dt", 1.0)?;
    let qmin: f64 = p.get("qmin", 10.0)?;
    let qmax: f64 = p.get("qmax", 100.0)?;
    let points: usize = p.get("points", 8)?;
    let params = echo(
        p,
        &[
            ("ell", ell_m.to_string()),
            ("mass", m.to_string()),
            ("nu", nu.to_string()),
            ("dt", dt.to_string()),
            ("qmin", qmin.to_string()),
            ("qmax", qmax.to_string()),
            ("points", points.to_string()),
        ],
    )?;
    if points < 3 || !(qmin > 0.0 && qmax > qmin) {
        return Err(Error::Usage("need points ≥ 3 and 0 < qmin < qmax".into()));
    }
    let lattice = exchange::TorusLattice3D::new(ell_m / m).map_err(usage_if_arg)?;
    let window = exchange::Window::new(0.0, dt).map_err(usage_if_arg)?;
    let model = exchange::CovarianceModel { nu };
    let qs = log_spaced(qmin * m, qmax * m, points);
    let scan = exchange::divergence_scan(&qs, &window, m, &model, &lattice).map_err(usage_if_arg)?;
    let mut r = Report::new("exchange-scan", params);
    let mut t = Table::new(&["Q", "S", "slope_running"]);
    for row in &scan.rows {
        t.push(vec![format_float(row.q), format_float(row.sum), row.running_slope.map(format_float).unwrap_or_default()]);
    }
    r.table = Some(t);
    r.float("slope", scan.slope);
    r.int("modes", scan.modes);
    r.text("zero_mode", "excluded");
    let comp = compton_scan(&lattice, m, &model)?;
    r.float("compton_ratio", comp.ratio);
    r.float("off_resonance_ratio", comp.off_resonance_ratio);
    r.verdict("quadratic_divergence", (1.5..=2.5).contains(&scan.slope));
    r.verdict("compton_suppression", comp.ratio >= 1e3);
    r.verdict("off_resonance_suppression", comp.off_resonance_ratio >= 1e2);
    Ok(r)
}

/// Compton scan at `p = (2π/ℓ, 0, 0)`, `r = 0` and `|q| ≈ 3m` along the third axis.
pub fn compton_scan(lattice: &exchange::TorusLattice3D, m: f64, model: &exchange::CovarianceModel) -> Result<exchange::ComptonScan> {
    let steps = (3.0 * m / lattice.spacing()).round().max(1.0) as i64;
    let q = lattice.momentum([0, 0, steps]);
    let dts = log_spaced(0.1, 10.0, 9);
    exchange::compton_suppression(&dts, lattice.momentum([1, 0, 0]), [0.0; 3], q, m, model)
}

/// `count` points from `lo` to `hi`, evenly spaced in log, with exact endpoints.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}
