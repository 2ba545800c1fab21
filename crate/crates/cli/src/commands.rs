use crate::table::{Cell, Table};
use crate::{Cli, CliError, Command, LemmaArgs, Report, SweepArgs};
use dpc_core::closed_form::{
    corollary1_bound, q_form, q_min, residual_variance_term, theorem1_bound, theorem1_term,
    virtual_channel, virtual_channel_term, BoundResult, Rate,
};
use dpc_core::lemma_eval::{self, LemmaError, SweepAxis, SweepValue};
use dpc_core::oracle::{gp_rate_max, GaussianJoint};
use dpc_core::sampling::{self, batch_moments, empirical_stats, modules, SampleBatch, Seed};
use dpc_core::scenario::{
    ChannelScenario, Domain, FamilyKind, ScenarioError, ScenarioFile, SecondOrderStats,
};

pub const BOUND_HEADER: &[&str] = &["method", "eta", "p", "rate_bits", "total_bits"];
pub const LEMMA_HEADER: &[&str] = &[
    "eta",
    "p",
    "alpha",
    "beta",
    "entropy_nats",
    "stderr",
    "rate_bits",
    "total_bits",
    "stderr_bits",
    "theorem1_bits",
];
pub const SWEEP_HEADER: &[&str] = &["axis", "value", "method", "total_bits", "stderr_bits"];
pub const VERIFY_HEADER: &[&str] = &["check", "status", "detail"];

pub(crate) fn dispatch(cli: &Cli) -> Result<Report, CliError> {
    let loaded = load(cli)?;
    match &cli.command {
        Command::Bound => bound(&valid(loaded)?),
        Command::Lemma(args) => lemma(&valid(loaded)?, cli, args),
        Command::Verify(args) => Ok(verify(loaded, cli, args)),
        Command::Sweep(args) => sweep(&valid(loaded)?, cli, args),
    }
}

fn load(cli: &Cli) -> Result<Result<ChannelScenario, ScenarioError>, CliError> {
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match ScenarioFile::parse(&text) {
        Ok(file) => Ok(file.resolve()),
        Err(e) => Err(CliError::Input(format!("{}: {e}", path.display()))),
    }
}

fn valid(loaded: Result<ChannelScenario, ScenarioError>) -> Result<ChannelScenario, CliError> {
    loaded.map_err(|e| CliError::Input(e.to_string()))
}

fn rate_cell(r: Rate) -> Cell {
    Cell::Num(r.bits().unwrap_or(f64::INFINITY))
}

fn stats_of(s: &ChannelScenario) -> Result<SecondOrderStats, CliError> {
    s.moment_algebra()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn push_bound(t: &mut Table, b: &BoundResult) {
    for term in &b.per_gain {
        t.push(vec![
            b.method.name().into(),
            term.eta.into(),
            term.p.into(),
            rate_cell(term.rate),
            rate_cell(b.rate),
        ]);
    }
}

/// Theorem rows always; corollary rows when the noise mean does not depend on
/// the input (`c_x = 0`).
pub fn bound(s: &ChannelScenario) -> Result<Report, CliError> {
    let stats = stats_of(s)?;
    let mut t = Table::new(BOUND_HEADER);
    push_bound(&mut t, &theorem1_bound(&stats, &s.gain, s.domain));
    if s.noise.c_x == 0.0 {
        let c = corollary1_bound(stats.sigma_x2(), stats.sigma_n2(), &s.gain, s.domain)
            .map_err(|e| CliError::Input(e.to_string()))?;
        push_bound(&mut t, &c);
    }
    Ok(Report::new(t))
}

fn lemma_error(e: LemmaError) -> CliError {
    CliError::Input(e.to_string())
}

pub fn lemma(s: &ChannelScenario, cli: &Cli, args: &LemmaArgs) -> Result<Report, CliError> {
    let cfg = args.config(&cli.common);
    let out = lemma_eval::lemma_bound(s, &cfg).map_err(lemma_error)?;
    let mut t = Table::new(LEMMA_HEADER);
    for a in &out.atoms {
        t.push(vec![
            a.eta.into(),
            a.p.into(),
            a.alpha.into(),
            a.beta.into(),
            a.entropy.map(|e| e.nats).into(),
            a.entropy.map(|e| e.stderr).into(),
            rate_cell(a.rate),
            rate_cell(out.bound.rate),
            a.stderr_bits.into(),
            rate_cell(a.theorem1),
        ]);
    }
    Ok(Report::new(t))
}

fn parse_values(axis: SweepAxis, text: &str) -> Result<Vec<SweepValue>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| match axis {
            SweepAxis::Family => v
                .parse::<FamilyKind>()
                .map(SweepValue::Family)
                .map_err(|e| e.to_string()),
            _ => v
                .parse::<f64>()
                .map(SweepValue::Number)
                .map_err(|e| format!("`{v}`: {e}")),
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("--values: {e}")))
}

/// Long format, two rows per axis value. Failing points are reported as
/// warnings and left out.
pub fn sweep(s: &ChannelScenario, cli: &Cli, args: &SweepArgs) -> Result<Report, CliError> {
    let cfg = args.lemma.config(&cli.common);
    cfg.validate().map_err(lemma_error)?;
    let values = parse_values(args.axis, &args.values)?;
    let mut t = Table::new(SWEEP_HEADER);
    let mut warnings = Vec::new();
    for (value, point) in values
        .iter()
        .zip(lemma_eval::sweep(s, args.axis, &values, &cfg))
    {
        match point {
            Ok(p) => {
                for b in [&p.lemma, &p.theorem] {
                    t.push(vec![
                        args.axis.name().into(),
                        match value {
                            SweepValue::Number(v) => Cell::Num(*v),
                            SweepValue::Family(k) => k.name().into(),
                        },
                        b.method.name().into(),
                        rate_cell(b.rate),
                        b.stderr_bits.into(),
                    ]);
                }
            }
            Err(e) => warnings.push(format!("{}={value}: {e}", args.axis.name())),
        }
    }
    let mut r = Report::new(t);
    r.warnings = warnings;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Checks {
    table: Table,
    failed: bool,
}

impl Checks {
    fn add(&mut self, name: &str, status: Status, detail: impl Into<String>) {
        let label = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        self.failed |= status == Status::Fail;
        self.table
            .push(vec![name.into(), label.into(), Cell::Text(detail.into())]);
    }

    fn result(&mut self, name: &str, r: Result<String, String>) {
        match r {
            Ok(d) => self.add(name, Status::Pass, d),
            Err(d) => self.add(name, Status::Fail, d),
        }
    }

    fn report(self) -> Report {
        Report {
            table: self.table,
            warnings: Vec::new(),
            failed: self.failed,
            human: true,
        }
    }
}

fn close(a: Rate, b: Rate, tol: f64) -> bool {
    match (a, b) {
        (Rate::Bits(x), Rate::Bits(y)) => (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0),
        (Rate::Unbounded, Rate::Unbounded) => true,
        _ => false,
    }
}

fn show(r: Rate) -> String {
    match r {
        Rate::Bits(v) => format!("{v:?}"),
        Rate::Unbounded => "inf".into(),
    }
}

fn variance_stderr(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sq: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    let ms = sq.iter().sum::<f64>() / n;
    let var_sq = sq.iter().map(|s| (s - ms) * (s - ms)).sum::<f64>() / (n - 1.0);
    (var_sq / n).sqrt()
}

fn check_moments(b: &SampleBatch, stats: &SecondOrderStats) -> Result<String, String> {
    let emp = empirical_stats(b).map_err(|e| e.to_string())?;
    let n = b.len() as f64;
    let tol = 4.0 / n.sqrt();
    let mut bad = Vec::new();
    if (emp.rho_xn() - stats.rho_xn()).abs() > tol {
        bad.push(format!("rho_xn {:?} vs {:?}", emp.rho_xn(), stats.rho_xn()));
    }
    if (emp.rho_zn() - stats.rho_zn()).abs() > tol {
        bad.push(format!("rho_zn {:?} vs {:?}", emp.rho_zn(), stats.rho_zn()));
    }
    if (emp.sigma_n2() - stats.sigma_n2()).abs() > 4.0 * variance_stderr(&b.noise) {
        bad.push(format!(
            "sigma_n2 {:?} vs {:?}",
            emp.sigma_n2(),
            stats.sigma_n2()
        ));
    }
    if (emp.sigma_x2() - stats.sigma_x2()).abs() > 4.0 * variance_stderr(&b.x) {
        bad.push(format!(
            "sigma_x2 {:?} vs {:?}",
            emp.sigma_x2(),
            stats.sigma_x2()
        ));
    }
    if bad.is_empty() {
        Ok(format!(
            "n={}, correlations within {tol:.2e}, variances within 4 SE",
            b.len()
        ))
    } else {
        Err(bad.join("; "))
    }
}

fn check_decorrelation(
    b: &SampleBatch,
    stats: &SecondOrderStats,
    sigma_z2: f64,
) -> Result<String, String> {
    let sn = stats.sigma_n2().sqrt();
    let kx = stats.rho_xn() * sn / stats.sigma_x2().sqrt();
    let kz = if sigma_z2 > 0.0 {
        stats.rho_zn() * sn / sigma_z2.sqrt()
    } else {
        0.0
    };
    let resid: Vec<f64> = (0..b.len())
        .map(|i| b.noise[i] - kx * b.x[i] - kz * b.z[i])
        .collect();
    let se = variance_stderr(&resid);
    let rb = SampleBatch {
        noise: resid,
        ..b.clone()
    };
    let m = batch_moments(&rb).map_err(|e| e.to_string())?;
    let tol = 4.0 / (b.len() as f64).sqrt();
    let target = stats.decorrelated_noise_variance();
    let rho_x = m.cov_xn / (m.var_x * m.var_n).sqrt();
    let mut bad = Vec::new();
    if rho_x.abs() > tol {
        bad.push(format!("corr(x, n~) = {rho_x:?}"));
    }
    if m.var_z > 0.0 {
        let rho_z = m.cov_zn / (m.var_z * m.var_n).sqrt();
        if rho_z.abs() > tol {
            bad.push(format!("corr(z, n~) = {rho_z:?}"));
        }
    }
    if (m.var_n - target).abs() > 5.0 * se {
        bad.push(format!("var(n~) = {:?} vs {target:?}", m.var_n));
    }
    if bad.is_empty() {
        Ok(format!("var(n~) = {:?} vs {target:?}", m.var_n))
    } else {
        Err(bad.join("; "))
    }
}

fn check_routes(s: &ChannelScenario, stats: &SecondOrderStats) -> Result<String, String> {
    for a in &s.gain.atoms {
        let t = theorem1_term(stats, a.eta, s.domain);
        let v = virtual_channel_term(stats, a.eta, s.domain);
        let r = residual_variance_term(stats, a.eta, s.domain);
        if !close(t, v, 1e-12) || !close(t, r, 1e-12) {
            return Err(format!(
                "eta={:?}: {} / {} / {}",
                a.eta,
                show(t),
                show(v),
                show(r)
            ));
        }
    }
    Ok("direct, virtual-channel and residual-variance forms agree to 1e-12".into())
}

fn check_corollary(
    s: &ChannelScenario,
    stats: &SecondOrderStats,
) -> Option<Result<String, String>> {
    if stats.rho_xn() != 0.0 || stats.rho_zn() != 0.0 {
        return None;
    }
    let t = theorem1_bound(stats, &s.gain, s.domain);
    Some(
        corollary1_bound(stats.sigma_x2(), stats.sigma_n2(), &s.gain, s.domain)
            .map_err(|e| e.to_string())
            .and_then(|c| {
                if close(t.rate, c.rate, 1e-12) {
                    Ok(format!("both {}", show(t.rate)))
                } else {
                    Err(format!(
                        "theorem1 {} vs corollary1 {}",
                        show(t.rate),
                        show(c.rate)
                    ))
                }
            }),
    )
}

fn check_oracle(
    s: &ChannelScenario,
    stats: &SecondOrderStats,
    sigma_z2: f64,
) -> Result<String, String> {
    let j = GaussianJoint::from_stats(stats, sigma_z2).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for a in &s.gain.atoms {
        let (r, _) = gp_rate_max(&j, a.eta).map_err(|e| format!("eta={:?}: {e}", a.eta))?;
        let t = theorem1_term(stats, a.eta, Domain::Real)
            .bits()
            .ok_or("unbounded closed form")?;
        let d = (r - t).abs();
        if d >= 1e-6 {
            return Err(format!(
                "eta={:?}: oracle {r:?} vs closed form {t:?}",
                a.eta
            ));
        }
        worst = worst.max(d);
    }
    Ok(format!("max |difference| = {worst:.1e} bits"))
}

fn check_q_min(s: &ChannelScenario, stats: &SecondOrderStats) -> Result<String, String> {
    let sx2 = stats.sigma_x2();
    for a in &s.gain.atoms {
        let vc = virtual_channel(stats, a.eta, None);
        let snt2 = vc.sigma_ntilde2;
        let (q, b) = q_min(vc.eta_tilde, sx2, snt2);
        let at = q_form(b, b, vc.eta_tilde, sx2, 1.0, snt2);
        if (at - q).abs() > 1e-12 * q.max(1e-300) {
            return Err(format!("eta={:?}: Q(beta*) = {at:?} vs {q:?}", a.eta));
        }
        for (da, db) in [
            (1e-3, 0.0),
            (-1e-3, 0.0),
            (0.0, 1e-3),
            (0.0, -1e-3),
            (1e-3, 1e-3),
        ] {
            let qq = q_form(b + da, b + db, vc.eta_tilde, sx2, 1.0, snt2);
            if qq < q * (1.0 - 1e-12) {
                return Err(format!("eta={:?}: perturbed Q {qq:?} below {q:?}", a.eta));
            }
        }
    }
    Ok("closed-form minimizer is a local minimum of Q".into())
}

fn check_complex(s: &ChannelScenario, stats: &SecondOrderStats) -> Result<String, String> {
    let r = theorem1_bound(stats, &s.gain, Domain::Real).rate;
    let c = theorem1_bound(stats, &s.gain, Domain::Complex).rate;
    match (r, c) {
        (Rate::Bits(x), Rate::Bits(y)) if y == 2.0 * x => Ok(format!("{y:?} = 2 x {x:?}")),
        (Rate::Unbounded, Rate::Unbounded) => Ok("both unbounded".into()),
        _ => Err(format!("complex {} vs real {}", show(c), show(r))),
    }
}

/// Noise is Gaussian when the innovation is and any interference loading
/// multiplies Gaussian interference.
fn gaussian_noise(s: &ChannelScenario) -> bool {
    s.noise.innovation.kind() == Some(FamilyKind::Gaussian)
        && (s.noise.c_z == 0.0 || s.interference.kind() == Some(FamilyKind::Gaussian))
}

fn check_lemma(
    s: &ChannelScenario,
    stats: &SecondOrderStats,
    cli: &Cli,
    args: &LemmaArgs,
) -> Result<String, String> {
    let cfg = args.config(&cli.common);
    let out = lemma_eval::lemma_bound(s, &cfg).map_err(|e| e.to_string())?;
    let t = theorem1_bound(stats, &s.gain, s.domain).rate;
    let eps = out.bound.stderr_bits.unwrap_or(0.0);
    let two_sided = gaussian_noise(s);
    match (out.bound.rate, t) {
        (Rate::Unbounded, Rate::Unbounded) => Ok("both unbounded".into()),
        (Rate::Bits(l), Rate::Bits(th)) => {
            let ok = l >= th - 3.0 * eps && (!two_sided || l <= th + 3.0 * eps);
            let detail = format!(
                "lemma {l:.6} vs theorem1 {th:.6}, eps {eps:.2e}{}",
                if two_sided { " (two-sided)" } else { "" }
            );
            if ok {
                Ok(detail)
            } else {
                Err(detail)
            }
        }
        (l, th) => Err(format!("lemma {} vs theorem1 {}", show(l), show(th))),
    }
}

/// Runs every applicable check. An invalid scenario is itself a failed check
/// rather than an input error.
pub fn verify(
    loaded: Result<ChannelScenario, ScenarioError>,
    cli: &Cli,
    args: &LemmaArgs,
) -> Report {
    let mut c = Checks {
        table: Table::new(VERIFY_HEADER),
        failed: false,
    };
    let s = match loaded {
        Ok(s) => s,
        Err(e) => {
            c.add("validation", Status::Fail, e.to_string());
            return c.report();
        }
    };
    let stats = match s.moment_algebra() {
        Ok(st) => st,
        Err(e) => {
            c.add("validation", Status::Fail, e.to_string());
            return c.report();
        }
    };
    c.add("validation", Status::Pass, "scenario is valid");

    let total = theorem1_bound(&stats, &s.gain, s.domain).rate;
    let bound_detail = match total {
        Rate::Bits(v) => format!("theorem1 total = {v:?} bits"),
        Rate::Unbounded => "theorem1 total = inf (noiseless, unbounded rate)".into(),
    };
    c.add("bound", Status::Pass, bound_detail);

    let sigma_z2 = s.interference_variance();
    let noiseless = stats.sigma_n2() == 0.0;
    let eta0 = s.gain.atoms[0].eta;
    let batch = match (sigma_z2, noiseless) {
        (None, _) => Err("interference has no finite variance".to_string()),
        (_, true) => Err("noise variance is zero".to_string()),
        _ => {
            let seed = Seed::new(cli.common.seed).with_module(modules::VERIFY);
            sampling::draw(&s, eta0, cli.common.samples, seed).map_err(|e| e.to_string())
        }
    };
    match &batch {
        Ok(b) => {
            c.result("moment_algebra", check_moments(b, &stats));
            c.result(
                "decorrelation",
                check_decorrelation(b, &stats, sigma_z2.unwrap_or(0.0)),
            );
        }
        Err(why) => {
            c.add("moment_algebra", Status::Skip, why.clone());
            c.add("decorrelation", Status::Skip, why.clone());
        }
    }

    c.result("closed_form_routes", check_routes(&s, &stats));
    match check_corollary(&s, &stats) {
        Some(r) => c.result("corollary1", r),
        None => c.add(
            "corollary1",
            Status::Skip,
            "noise is correlated with input or interference",
        ),
    }
    match sigma_z2 {
        _ if noiseless => c.add("oracle", Status::Skip, "noise variance is zero"),
        Some(v) if v > 0.0 => c.result("oracle", check_oracle(&s, &stats, v)),
        _ => c.add(
            "oracle",
            Status::Skip,
            "interference variance is zero or infinite",
        ),
    }
    if noiseless {
        c.add("q_min", Status::Skip, "noise variance is zero");
    } else {
        c.result("q_min", check_q_min(&s, &stats));
    }
    c.result("complex_factor", check_complex(&s, &stats));
    if noiseless {
        c.add("lemma_ordering", Status::Skip, "noise variance is zero");
    } else {
        match check_lemma(&s, &stats, cli, args) {
            Err(e) if sigma_z2.is_none() => c.add("lemma_ordering", Status::Skip, e),
            r => c.result("lemma_ordering", r),
        }
    }
    c.report()
}
