//! C ABI over `alu-core`.
//!
//! Every fallible function returns an [`AluStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and
//! read with [`alu_last_error_message`]. Handles are opaque and released
//! with their matching `_free` function; passing NULL to a `_free` is a
//! no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use alu_core::attack::run_attack;
use alu_core::bounds::{
    bound_learn_retrain_strongly_convex, bound_unlearn, generalization_bound, required_sigma,
    DataPartition, DivergenceBound, NoiseMode, NoiseRegime, UnlearnRegime,
};
use alu_core::model::{derive_profile, Dataset};
use alu_core::pngd::{sample_distribution, HyperParams, ModelSampleSet, Pipeline};
use alu_core::renyi::{estimate_renyi_sets, DiscriminatorSpec, EstimatorConfig, Objective};
use alu_core::workbench::{generate_synthetic, SyntheticShiftSpec};
use alu_core::{io, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Dimension = 4,
    Numerical = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluPipeline {
    Learn = 0,
    Unlearn = 1,
    Retrain = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluObjective {
    DonskerVaradhan = 0,
    ConvexConjugate = 1,
}

/// PNGD settings. `lambda` and `clip` fix the loss profile.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct AluTrainParams {
    pub lambda: f64,
    pub clip: f64,
    pub eta: f64,
    pub sigma: f64,
    pub t: usize,
    pub k: usize,
    pub radius: f64,
    pub alpha: f64,
}

pub struct AluDataset(Dataset);

pub struct AluSampleSet(ModelSampleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn alu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn alu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> AluStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return AluStatus::Ok,
        Ok(Err(Failure::Null(name))) => (AluStatus::NullPointer, format!("{name} is NULL")),
        Ok(Err(Failure::Invalid(m))) => (AluStatus::InvalidArgument, m),
        Ok(Err(Failure::Core(e))) => {
            let status = match &e {
                Error::Domain(_) => AluStatus::Domain,
                Error::Dimension { .. } => AluStatus::Dimension,
                Error::Numerical(_) => AluStatus::Numerical,
                Error::Parse { .. } => AluStatus::Parse,
                Error::Io { .. } => AluStatus::Io,
            };
            (status, e.to_string())
        }
        Err(_) => (AluStatus::Panic, "internal panic".to_string()),
    };
    set_last_error(msg);
    status
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn write_out<T>(out: *mut T, name: &'static str, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn path(p: *const c_char, name: &'static str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn hyper(p: &AluTrainParams) -> FfiResult<(alu_core::model::LossProfile, HyperParams)> {
    let profile = derive_profile(p.lambda, p.clip)?;
    let hp = HyperParams {
        eta: p.eta,
        sigma: p.sigma,
        t: p.t,
        k: p.k,
        radius: p.radius,
        alpha: p.alpha,
    };
    hp.validate()?;
    Ok((profile, hp))
}

/// Load a dataset written by the workbench (features CSV plus JSON manifest).
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_dataset_read(
    csv_path: *const c_char,
    manifest_path: *const c_char,
    out: *mut *mut AluDataset,
) -> AluStatus {
    guard(|| {
        let ds = io::read_dataset(
            &path(csv_path, "csv_path")?,
            &path(manifest_path, "manifest_path")?,
        )?;
        write_out(out, "out", Box::into_raw(Box::new(AluDataset(ds))))
    })
}

/// Generate a synthetic shifted-mixture dataset from a JSON spec with the
/// same keys as the `data` section of an experiment config.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_dataset_synthetic(
    spec_json: *const c_char,
    out: *mut *mut AluDataset,
) -> AluStatus {
    guard(|| {
        if spec_json.is_null() {
            return Err(Failure::Null("spec_json"));
        }
        let text = CStr::from_ptr(spec_json)
            .to_str()
            .map_err(|_| Failure::Invalid("spec_json is not UTF-8".into()))?;
        let spec: SyntheticShiftSpec = serde_json::from_str(text)
            .map_err(|e| Failure::Invalid(format!("synthetic spec: {e}")))?;
        let ds = generate_synthetic(&spec)?.dataset;
        write_out(out, "out", Box::into_raw(Box::new(AluDataset(ds))))
    })
}

/// # Safety
/// `ds` must be a live dataset handle; each out-pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_dataset_counts(
    ds: *const AluDataset,
    n_pub: *mut usize,
    n_priv: *mut usize,
    n_forget: *mut usize,
    dim: *mut usize,
) -> AluStatus {
    guard(|| {
        let ds = &deref(ds, "ds")?.0;
        write_out(n_pub, "n_pub", ds.n_pub())?;
        write_out(n_priv, "n_priv", ds.n_priv())?;
        write_out(n_forget, "n_forget", ds.n_forget())?;
        write_out(dim, "dim", ds.dim()?)
    })
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn alu_dataset_free(ds: *mut AluDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Draw `n` models from `pipeline`; run `i` uses seed `seed_base + i`.
///
/// # Safety
/// `ds` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_sample(
    ds: *const AluDataset,
    pipeline: AluPipeline,
    n: usize,
    params: *const AluTrainParams,
    seed_base: u64,
    out: *mut *mut AluSampleSet,
) -> AluStatus {
    guard(|| {
        let ds = &deref(ds, "ds")?.0;
        let (profile, hp) = hyper(deref(params, "params")?)?;
        let pipeline = match pipeline {
            AluPipeline::Learn => Pipeline::Learn,
            AluPipeline::Unlearn => Pipeline::Unlearn,
            AluPipeline::Retrain => Pipeline::Retrain,
        };
        let set = sample_distribution(ds, pipeline, n, &hp, &profile, seed_base)?;
        write_out(out, "out", Box::into_raw(Box::new(AluSampleSet(set))))
    })
}

/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_samples_read(
    file: *const c_char,
    out: *mut *mut AluSampleSet,
) -> AluStatus {
    guard(|| {
        let set = io::read_samples(&path(file, "path")?)?;
        write_out(out, "out", Box::into_raw(Box::new(AluSampleSet(set))))
    })
}

/// # Safety
/// `set` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn alu_samples_write(
    set: *const AluSampleSet,
    file: *const c_char,
) -> AluStatus {
    guard(|| {
        Ok(io::write_samples(
            &deref(set, "set")?.0,
            &path(file, "path")?,
        )?)
    })
}

/// # Safety
/// `set` must be a live handle; `len` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_samples_shape(
    set: *const AluSampleSet,
    len: *mut usize,
    dim: *mut usize,
) -> AluStatus {
    guard(|| {
        let set = &deref(set, "set")?.0;
        write_out(len, "len", set.len())?;
        write_out(dim, "dim", set.dim())
    })
}

/// Copy the weights of model `index` into `buf`, which holds `buf_len` values.
///
/// # Safety
/// `set` must be a live handle; `buf` must have room for `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn alu_samples_weights(
    set: *const AluSampleSet,
    index: usize,
    buf: *mut f64,
    buf_len: usize,
) -> AluStatus {
    guard(|| {
        let set = &deref(set, "set")?.0;
        let w = &set
            .samples
            .get(index)
            .ok_or_else(|| Failure::Invalid(format!("index {index} out of range ({})", set.len())))?
            .weights;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if buf_len < w.len() {
            return Err(Failure::Invalid(format!(
                "buffer holds {buf_len}, need {}",
                w.len()
            )));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), buf, w.len());
        Ok(())
    })
}

/// # Safety
/// `set` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn alu_samples_free(set: *mut AluSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Strongly convex closed form of the learning/retraining divergence bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_bound_learn_retrain(
    params: *const AluTrainParams,
    n_pub: usize,
    n_priv: usize,
    n_forget: usize,
    out: *mut f64,
) -> AluStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let (profile, _) = hyper(p)?;
        let part = DataPartition::new(n_pub, n_priv, n_forget)?;
        let b = bound_learn_retrain_strongly_convex(p.alpha, &profile, p.eta, p.sigma, p.t, &part)?;
        write_out(out, "out", b.value)
    })
}

/// Strongly convex unlearning bound after `params.k` steps from `d_init`,
/// with log-Sobolev constant `c` (requires `c > sigma^2 / lambda`).
///
/// # Safety
/// `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_bound_unlearn(
    params: *const AluTrainParams,
    d_init: f64,
    c: f64,
    out: *mut f64,
) -> AluStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let (profile, hp) = hyper(p)?;
        let init = DivergenceBound::user_supplied(d_init, p.alpha)?;
        let b = bound_unlearn(
            &init,
            p.k,
            p.alpha,
            &hp,
            &profile,
            &UnlearnRegime::StronglyConvex { c },
        )?;
        write_out(out, "out", b.value)
    })
}

/// Noise level that keeps the strongly convex learning/retraining bound at
/// `epsilon`; `asymmetric` accounts for the public share of the data.
///
/// # Safety
/// `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_required_sigma(
    params: *const AluTrainParams,
    n_pub: usize,
    n_priv: usize,
    n_forget: usize,
    epsilon: f64,
    asymmetric: bool,
    out: *mut f64,
) -> AluStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let profile = derive_profile(p.lambda, p.clip)?;
        let part = DataPartition::new(n_pub, n_priv, n_forget)?;
        let mode = if asymmetric {
            NoiseMode::Asymmetric
        } else {
            NoiseMode::Symmetric
        };
        let r = required_sigma(
            p.alpha,
            &profile,
            &part,
            epsilon,
            p.t,
            p.eta,
            mode,
            &NoiseRegime::StronglyConvexClosedForm,
        )?;
        write_out(out, "out", r.sigma)
    })
}

/// Private-risk bound under distribution mismatch.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_generalization_bound(
    d_infty: f64,
    n_pub: usize,
    n_retain: usize,
    base_risk: f64,
    lipschitz: f64,
    diameter: f64,
    d_alpha: f64,
    out: *mut f64,
) -> AluStatus {
    guard(|| {
        let b = generalization_bound(
            d_infty, n_pub, n_retain, base_risk, lipschitz, diameter, d_alpha,
        )?;
        write_out(out, "out", b.total)
    })
}

/// Estimate `D_alpha(P || Q)` with the default discriminator, training for
/// `epochs` epochs under seeds `0..n_seeds`.
///
/// # Safety
/// `p` and `q` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_estimate_renyi(
    p: *const AluSampleSet,
    q: *const AluSampleSet,
    alpha: f64,
    objective: AluObjective,
    epochs: usize,
    n_seeds: u64,
    out: *mut f64,
) -> AluStatus {
    guard(|| {
        let (p, q) = (&deref(p, "p")?.0, &deref(q, "q")?.0);
        let objective = match objective {
            AluObjective::DonskerVaradhan => Objective::Dv,
            AluObjective::ConvexConjugate => Objective::Cc,
        };
        let cfg = EstimatorConfig {
            alpha,
            epochs,
            seeds: (0..n_seeds).collect(),
            objective,
            ..Default::default()
        };
        let spec = DiscriminatorSpec::for_objective(p.dim(), objective);
        let est = estimate_renyi_sets(p, q, &spec, &cfg)?;
        write_out(out, "out", est.value)
    })
}

/// Membership attack on forget example `forget_index` of `ds`. Shadow and
/// test sets must come from disjoint seeds.
///
/// # Safety
/// Every handle must be live; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn alu_attack(
    ds: *const AluDataset,
    forget_index: usize,
    shadow_unlearn: *const AluSampleSet,
    shadow_retrain: *const AluSampleSet,
    test_unlearn: *const AluSampleSet,
    test_retrain: *const AluSampleSet,
    accuracy: *mut f64,
    median_confidence: *mut f64,
) -> AluStatus {
    guard(|| {
        let ds = &deref(ds, "ds")?.0;
        let example = ds
            .forget
            .get(forget_index)
            .ok_or_else(|| Failure::Invalid(format!("forget index {forget_index} out of range")))?;
        let report = run_attack(
            &deref(shadow_unlearn, "shadow_unlearn")?.0,
            &deref(shadow_retrain, "shadow_retrain")?.0,
            &deref(test_unlearn, "test_unlearn")?.0,
            &deref(test_retrain, "test_retrain")?.0,
            example,
        )?;
        write_out(accuracy, "accuracy", report.accuracy)?;
        write_out(
            median_confidence,
            "median_confidence",
            report.median_confidence(),
        )
    })
}
