//! C interface to `bellstat`.
//!
//! Every fallible function returns a [`BsStatus`]; on failure the message is
//! kept per thread and can be fetched with [`bs_last_error`]. Objects with
//! internal state are opaque handles that must be released with the
//! matching `_free` function. Settings and outcomes are passed as numbers:
//! settings are 1 or 2, outcomes 1 (detected) or 0 (not detected).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bellstat::adversary::{AdversaryConfig, AdversaryKind, Placement, Strategy};
use bellstat::inequality::{che_j, CellProbs, CondProbs};
use bellstat::martingale::{self, default_streak, Analyzer, IncrementName, IncrementSpec, ProcessSummary};
use bellstat::optimizer;
use bellstat::quantum::{quantum_trial_probs, QuantumModel};
use bellstat::rng::RngSeed;
use bellstat::simulate::{simulate, TrialSource, TrialStream};
use bellstat::spacetime::{self, SpacetimeConfig};
use bellstat::{Error, Outcome, PredictabilityMode, Setting, SettingsProfile, TrialRecord};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Infeasible = 3,
    Io = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(BsStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => BsStatus::Infeasible,
            4 => BsStatus::Io,
            _ => BsStatus::Validation,
        };
        set_error(e.to_string());
        Failure(status)
    }
}

fn null(what: &str) -> Failure {
    set_error(format!("null pointer: {what}"));
    Failure(BsStatus::NullPointer)
}

fn invalid(msg: impl Into<String>) -> Failure {
    set_error(msg.into());
    Failure(BsStatus::Validation)
}

fn ffi_call(f: impl FnOnce() -> Result<(), Failure>) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(_) => {
            set_error("internal panic".into());
            BsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the length needed including the NUL, or 0
/// when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

fn setting(v: u8) -> Result<Setting, Failure> {
    match v {
        1 => Ok(Setting::First),
        2 => Ok(Setting::Second),
        _ => Err(invalid(format!("setting must be 1 or 2, got {v}"))),
    }
}

fn outcome(v: u8) -> Result<Outcome, Failure> {
    match v {
        0 => Ok(Outcome::Undetected),
        1 => Ok(Outcome::Plus),
        _ => Err(invalid(format!("outcome must be 0 or 1, got {v}"))),
    }
}

/// Probabilities of the four outcome pairs for one setting combination.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsCellProbs {
    pub pp: f64,
    pub pz: f64,
    pub zp: f64,
    pub zz: f64,
}

impl From<CellProbs> for BsCellProbs {
    fn from(c: CellProbs) -> Self {
        BsCellProbs {
            pp: c.pp,
            pz: c.pz,
            zp: c.zp,
            zz: c.zz,
        }
    }
}

/// Conditional probabilities indexed `[a - 1][b - 1]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsCondProbs {
    pub cells: [[BsCellProbs; 2]; 2],
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsQuantumParams {
    pub r: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub visibility: f64,
    pub p_dark: f64,
}

/// Opaque quantum photon-pair model.
pub struct BsQuantumModel(QuantumModel);

/// # Safety
/// `params` must be valid; `out` receives a handle to free with
/// [`bs_quantum_model_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_quantum_model_new(
    params: *const BsQuantumParams,
    out: *mut *mut BsQuantumModel,
) -> BsStatus {
    ffi_call(|| {
        let p = deref(params, "params")?;
        let out = deref_mut(out, "out")?;
        let model = QuantumModel {
            r: p.r,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta1: p.beta1,
            beta2: p.beta2,
            eta_a: p.eta_a,
            eta_b: p.eta_b,
            visibility: p.visibility,
            p_dark: p.p_dark,
        };
        model.validate()?;
        *out = Box::into_raw(Box::new(BsQuantumModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`bs_quantum_model_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bs_quantum_model_free(model: *mut BsQuantumModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Outcome probabilities of the model for settings `a`, `b`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_quantum_trial_probs(
    model: *const BsQuantumModel,
    a: u8,
    b: u8,
    out: *mut BsCellProbs,
) -> BsStatus {
    ffi_call(|| {
        let m = deref(model, "model")?;
        let out = deref_mut(out, "out")?;
        *out = quantum_trial_probs(&m.0, setting(a)?, setting(b)?)?.into();
        Ok(())
    })
}

/// CH-E value of the model.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_quantum_che_j(model: *const BsQuantumModel, out: *mut f64) -> BsStatus {
    ffi_call(|| {
        let m = deref(model, "model")?;
        *deref_mut(out, "out")? = che_j(&m.0.cond_probs());
        Ok(())
    })
}

/// CH-E value of arbitrary conditional probabilities.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_che_j(probs: *const BsCondProbs, out: *mut f64) -> BsStatus {
    ffi_call(|| {
        let p = deref(probs, "probs")?;
        let cell = |c: &BsCellProbs| CellProbs {
            pp: c.pp,
            pz: c.pz,
            zp: c.zp,
            zz: c.zz,
        };
        let cond = CondProbs::new([
            [cell(&p.cells[0][0]), cell(&p.cells[0][1])],
            [cell(&p.cells[1][0]), cell(&p.cells[1][1])],
        ]);
        cond.validate()?;
        *deref_mut(out, "out")? = che_j(&cond);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsMode {
    CommunicationFraction = 0,
    ExcessPredictability = 1,
    BeyondHalf = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsSettingsProfile {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub mode: BsMode,
    pub qf: f64,
}

impl From<&BsSettingsProfile> for SettingsProfile {
    fn from(p: &BsSettingsProfile) -> Self {
        SettingsProfile {
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            eps_a: p.eps_a,
            eps_b: p.eps_b,
            mode: match p.mode {
                BsMode::CommunicationFraction => PredictabilityMode::CommunicationFraction,
                BsMode::ExcessPredictability => PredictabilityMode::ExcessPredictability,
                BsMode::BeyondHalf => PredictabilityMode::BeyondHalf,
            },
            qf: p.qf,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BsTrial {
    pub index: u64,
    pub a: u8,
    pub b: u8,
    pub alice: u8,
    pub bob: u8,
}

impl From<TrialRecord> for BsTrial {
    fn from(t: TrialRecord) -> Self {
        BsTrial {
            index: t.index,
            a: t.a.label(),
            b: t.b.label(),
            alice: t.alice.is_plus() as u8,
            bob: t.bob.is_plus() as u8,
        }
    }
}

fn to_record(t: &BsTrial) -> Result<TrialRecord, Failure> {
    Ok(TrialRecord {
        index: t.index,
        a: setting(t.a)?,
        b: setting(t.b)?,
        alice: outcome(t.alice)?,
        bob: outcome(t.bob)?,
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsAdversaryKind {
    DeterministicLhv = 0,
    MemoryLhv = 1,
    CommPure = 2,
    CommPrbox = 3,
    PredictabilitySkew = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsAdversaryParams {
    pub kind: BsAdversaryKind,
    /// Deterministic strategy (0..=15), or the base strategy of the
    /// communication and skew adversaries.
    pub strategy: u8,
    /// Communicated trials: 0 independent per trial, 1 a leading block.
    pub leading_block: bool,
    /// Target excursion of the memory adversary, in units of sqrt(N).
    pub target_c: f64,
}

/// Opaque trial generator.
pub struct BsSimulator(TrialStream);

fn new_simulator(
    source: TrialSource,
    n_trials: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut BsSimulator,
) -> Result<(), Failure> {
    let out = unsafe { deref_mut(out, "out")? };
    let trials = simulate(&source, n_trials, RngSeed { seed, stream })?;
    *out = Box::into_raw(Box::new(BsSimulator(trials)));
    Ok(())
}

/// Generator of `n_trials` trials of the quantum model.
///
/// # Safety
/// Pointers must be valid; free the result with [`bs_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_simulator_new_quantum(
    model: *const BsQuantumModel,
    profile: *const BsSettingsProfile,
    n_trials: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut BsSimulator,
) -> BsStatus {
    ffi_call(|| {
        let m = deref(model, "model")?;
        let p = deref(profile, "profile")?;
        new_simulator(TrialSource::quantum(m.0, p.into()), n_trials, seed, stream, out)
    })
}

/// Generator of `n_trials` trials of a local-realist adversary.
///
/// # Safety
/// Pointers must be valid; free the result with [`bs_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_simulator_new_adversary(
    params: *const BsAdversaryParams,
    profile: *const BsSettingsProfile,
    n_trials: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut BsSimulator,
) -> BsStatus {
    ffi_call(|| {
        let a = deref(params, "params")?;
        let p = deref(profile, "profile")?;
        let strategy = Strategy::new(a.strategy)?;
        let placement = if a.leading_block {
            Placement::LeadingBlock
        } else {
            Placement::Bernoulli
        };
        let kind = match a.kind {
            BsAdversaryKind::DeterministicLhv => AdversaryKind::DeterministicLhv { strategy },
            BsAdversaryKind::MemoryLhv => AdversaryKind::MemoryLhv { target_c: a.target_c },
            BsAdversaryKind::CommPure => AdversaryKind::CommPure { placement },
            BsAdversaryKind::CommPrbox => AdversaryKind::CommPrbox { placement },
            BsAdversaryKind::PredictabilitySkew => AdversaryKind::PredictabilitySkew,
        };
        let config = AdversaryConfig::new(kind, p.into()).with_base(strategy);
        new_simulator(TrialSource::Adversary(config), n_trials, seed, stream, out)
    })
}

/// Writes up to `capacity` further trials into `buf`; `written` receives the
/// count, which is 0 once the generator is exhausted.
///
/// # Safety
/// `buf` must hold `capacity` trials; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_simulator_next(
    sim: *mut BsSimulator,
    buf: *mut BsTrial,
    capacity: usize,
    written: *mut usize,
) -> BsStatus {
    ffi_call(|| {
        let sim = deref_mut(sim, "sim")?;
        let written = deref_mut(written, "written")?;
        if buf.is_null() && capacity > 0 {
            return Err(null("buf"));
        }
        let mut n = 0;
        while n < capacity {
            let Some(t) = sim.0.next() else { break };
            buf.add(n).write(t.into());
            n += 1;
        }
        *written = n;
        Ok(())
    })
}

/// # Safety
/// `sim` must come from a `bs_simulator_new_*` function and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bs_simulator_free(sim: *mut BsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsIncrementKind {
    PlainJ = 0,
    ShiftedK = 1,
    AdaptedJeps = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsSummary {
    pub n: u64,
    pub m: u64,
    pub m_last: u64,
    pub z: f64,
    pub r: f64,
    pub s: u64,
    pub c: f64,
    pub p_value: f64,
    pub f: f64,
}

impl From<ProcessSummary> for BsSummary {
    fn from(s: ProcessSummary) -> Self {
        BsSummary {
            n: s.n,
            m: s.m,
            m_last: s.m_last,
            z: s.z,
            r: s.r,
            s: s.s,
            c: s.c,
            p_value: s.p_value,
            f: s.f,
        }
    }
}

/// Opaque single-pass analyzer.
pub struct BsAnalyzer(Analyzer);

/// Analyzer for increments of `kind` built from `profile`. With
/// `use_default_streak` the streak is `floor(1/shift)`, otherwise `streak`.
///
/// # Safety
/// Pointers must be valid; free the result with [`bs_analyzer_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_analyzer_new(
    kind: BsIncrementKind,
    profile: *const BsSettingsProfile,
    guard: f64,
    streak: u64,
    use_default_streak: bool,
    out: *mut *mut BsAnalyzer,
) -> BsStatus {
    ffi_call(|| {
        let p: SettingsProfile = deref(profile, "profile")?.into();
        let out = deref_mut(out, "out")?;
        let name = match kind {
            BsIncrementKind::PlainJ => IncrementName::PlainJ,
            BsIncrementKind::ShiftedK => IncrementName::ShiftedK,
            BsIncrementKind::AdaptedJeps => IncrementName::AdaptedJeps,
        };
        let spec = IncrementSpec::from_profile(&p, name)?.with_guard(guard)?;
        let streak = if use_default_streak {
            default_streak(spec.weights()?.shift)
        } else {
            streak
        };
        *out = Box::into_raw(Box::new(BsAnalyzer(Analyzer::new(spec, streak)?)));
        Ok(())
    })
}

/// Feeds `n` trials in order.
///
/// # Safety
/// `trials` must point to `n` trials; `analyzer` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_analyzer_push(analyzer: *mut BsAnalyzer, trials: *const BsTrial, n: usize) -> BsStatus {
    ffi_call(|| {
        let an = deref_mut(analyzer, "analyzer")?;
        if trials.is_null() && n > 0 {
            return Err(null("trials"));
        }
        for k in 0..n {
            an.0.push(&to_record(&*trials.add(k))?)?;
        }
        Ok(())
    })
}

/// Summary of the trials pushed so far. The analyzer stays usable.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_analyzer_summary(analyzer: *const BsAnalyzer, out: *mut BsSummary) -> BsStatus {
    ffi_call(|| {
        let an = deref(analyzer, "analyzer")?;
        *deref_mut(out, "out")? = an.0.clone().finish()?.into();
        Ok(())
    })
}

/// # Safety
/// `analyzer` must come from [`bs_analyzer_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bs_analyzer_free(analyzer: *mut BsAnalyzer) {
    if !analyzer.is_null() {
        drop(Box::from_raw(analyzer));
    }
}

/// Hoeffding bound `exp(-2 c^2 / r^2)` with `c = z / sqrt(length)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_hoeffding_pvalue(z: f64, length: u64, range: f64, out: *mut f64) -> BsStatus {
    ffi_call(|| {
        *deref_mut(out, "out")? = martingale::hoeffding_pvalue(z, length, range)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsRuntimePlan {
    pub t_plain: f64,
    pub t_doob: f64,
    pub c_adjusted: f64,
}

/// Run-time estimate; fails with `Infeasible` when `j <= eps_ab`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_plan_runtime(
    rate: f64,
    j: f64,
    eps_ab: f64,
    c: f64,
    f: f64,
    streak: u64,
    range: f64,
    out: *mut BsRuntimePlan,
) -> BsStatus {
    ffi_call(|| {
        let plan = martingale::plan_runtime(rate, j, eps_ab, c, f, streak, range)?;
        *deref_mut(out, "out")? = BsRuntimePlan {
            t_plain: plan.t_plain,
            t_doob: plan.t_doob,
            c_adjusted: plan.c_adjusted,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BsSpacetimeConfig {
    pub d: f64,
    pub n: f64,
    pub tau_g: f64,
    pub tau_m: f64,
    pub tau_s: f64,
    pub tau_d: f64,
    pub c0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsGeometry {
    pub tau1: f64,
    pub tau2: f64,
    /// `tau1 - tauS`.
    pub margin_generation: f64,
    /// `tau2 - (tauS + tauD)`.
    pub margin_deployment: f64,
    pub feasible: bool,
}

/// Timing budgets and feasibility of a symmetric arrangement.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_spacetime_check(config: *const BsSpacetimeConfig, out: *mut BsGeometry) -> BsStatus {
    ffi_call(|| {
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        let config = SpacetimeConfig {
            d: c.d,
            n: c.n,
            tau_g: c.tau_g,
            tau_m: c.tau_m,
            tau_s: c.tau_s,
            tau_d: c.tau_d,
            c0: c.c0,
        };
        let report = spacetime::validate_geometry(&config)?;
        *out = BsGeometry {
            tau1: report.limits.tau1,
            tau2: report.limits.tau2,
            margin_generation: report.constraints[0].margin,
            margin_deployment: report.constraints[1].margin,
            feasible: report.feasible,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsOptimization {
    pub best_j: f64,
    pub r_star: f64,
    pub angles_star: [f64; 4],
    pub evaluations: u64,
    pub converged: bool,
}

/// Maximum CH-E value at efficiency `eta`. A negative `fixed_r` lets the
/// state vary.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_optimize_j(
    eta: f64,
    fixed_r: f64,
    visibility: f64,
    p_dark: f64,
    out: *mut BsOptimization,
) -> BsStatus {
    ffi_call(|| {
        let out = deref_mut(out, "out")?;
        let fixed = (fixed_r >= 0.0).then_some(fixed_r);
        let r = optimizer::optimize_j(eta, fixed, visibility, p_dark)?;
        *out = BsOptimization {
            best_j: r.best_j,
            r_star: r.r_star,
            angles_star: r.angles_star,
            evaluations: r.evaluations,
            converged: r.converged,
        };
        Ok(())
    })
}

/// Detection-efficiency threshold by bisection to width `tol`. A negative
/// `fixed_r` lets the state vary.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bs_critical_efficiency(
    fixed_r: f64,
    visibility: f64,
    p_dark: f64,
    tol: f64,
    out: *mut f64,
) -> BsStatus {
    ffi_call(|| {
        let out = deref_mut(out, "out")?;
        let fixed = (fixed_r >= 0.0).then_some(fixed_r);
        *out = optimizer::critical_efficiency(fixed, visibility, p_dark, tol)?.eta;
        Ok(())
    })
}
