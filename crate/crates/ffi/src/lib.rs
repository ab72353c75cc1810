//! C ABI over the pipeline: opaque dataset handles, integer status codes
//! mirroring the CLI exit codes, and UTF-8 JSON strings for structured
//! results. The header is generated by cbindgen at build time into
//! `include/embexp.h`.
//!
//! Conventions:
//! - every function returns `EmbexpStatus`; outputs go through out-pointers
//! - strings returned through out-pointers are owned by the library and must
//!   be released with `embexp_string_free`
//! - on any non-Ok status, `embexp_last_error` returns a message for the
//!   calling thread

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use embexp::dataset::{load_csv, summarize, BlindedDataset, SchemaMap};
use embexp::error::Error;
use embexp::protocol::{run_protocol, ProtocolConfig};

/// Status codes, aligned with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbexpStatus {
    Ok = 0,
    /// invalid arguments at the FFI boundary (null pointer, bad UTF-8)
    InvalidArgument = 1,
    /// configuration / usage error
    Config = 2,
    /// data error (missing column, parse failure, empty input)
    Data = 3,
    /// numeric failure (singularity, divergence, domain)
    Numeric = 4,
    /// blinding violation or tampered lock
    Blinding = 5,
    /// a panic crossed the boundary; state may be stale
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EmbexpStatus {
    match e.exit_code() {
        2 => EmbexpStatus::Config,
        3 => EmbexpStatus::Data,
        5 => EmbexpStatus::Blinding,
        _ => EmbexpStatus::Numeric,
    }
}

fn catch<F: FnOnce() -> Result<EmbexpStatus, Error>>(f: F) -> EmbexpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("panic crossed the FFI boundary".into());
            EmbexpStatus::Panic
        }
    }
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, Error> {
    if ptr.is_null() {
        return Err(Error::Config("null path".into()));
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::Config("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn out_string(out: *mut *mut c_char, text: String) -> Result<(), Error> {
    let c = CString::new(text).map_err(|_| Error::Config("embedded NUL in output".into()))?;
    unsafe {
        *out = c.into_raw();
    }
    Ok(())
}

/// Opaque dataset handle (covariates and treatment visible, outcomes sealed).
pub struct EmbexpDataset {
    inner: BlindedDataset,
}

/// Last error message for this thread, or null when the last call succeeded.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn embexp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn embexp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Load a dataset CSV with the reference schema (age, fev, ht, sex, smoke),
/// or with the schema map of the given protocol config when `config_path`
/// is non-null.
///
/// # Safety
/// `csv_path` (and `config_path` when non-null) must be NUL-terminated
/// strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn embexp_dataset_load(
    csv_path: *const c_char,
    config_path: *const c_char,
    out: *mut *mut EmbexpDataset,
) -> EmbexpStatus {
    catch(|| {
        if out.is_null() {
            return Err(Error::Config("null output pointer".into()));
        }
        let csv = path_arg(csv_path)?;
        let schema = if config_path.is_null() {
            SchemaMap::default()
        } else {
            let raw = std::fs::read_to_string(path_arg(config_path)?)?;
            ProtocolConfig::parse(&raw)?.schema()
        };
        let ds = load_csv(Path::new(&csv), &schema)?;
        *out = Box::into_raw(Box::new(EmbexpDataset { inner: ds }));
        Ok(EmbexpStatus::Ok)
    })
}

/// Number of units in the dataset.
///
/// # Safety
/// `ds` must be a live handle from `embexp_dataset_load`.
#[no_mangle]
pub unsafe extern "C" fn embexp_dataset_len(ds: *const EmbexpDataset, out: *mut usize) -> EmbexpStatus {
    catch(|| {
        if ds.is_null() || out.is_null() {
            return Err(Error::Config("null pointer".into()));
        }
        *out = (*ds).inner.len();
        Ok(EmbexpStatus::Ok)
    })
}

/// Covariate/treatment summary (never touches outcomes) as a JSON string.
///
/// # Safety
/// `ds` must be a live handle; `out_json` must be a valid pointer. Free the
/// string with `embexp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn embexp_dataset_summarize(
    ds: *const EmbexpDataset,
    out_json: *mut *mut c_char,
) -> EmbexpStatus {
    catch(|| {
        if ds.is_null() || out_json.is_null() {
            return Err(Error::Config("null pointer".into()));
        }
        let s = summarize(&(*ds).inner);
        out_string(out_json, serde_json::to_string_pretty(&s)?)?;
        Ok(EmbexpStatus::Ok)
    })
}

/// Run a full protocol (design → balance → lock → analyses) and write the
/// report bundle into `out_dir`. `seed_override` < 0 keeps the config seed.
///
/// # Safety
/// `config_path` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn embexp_run_protocol(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed_override: i64,
) -> EmbexpStatus {
    catch(|| {
        let cfg_path = path_arg(config_path)?;
        let dir = path_arg(out_dir)?;
        let raw = std::fs::read_to_string(&cfg_path)?;
        let mut cfg = ProtocolConfig::parse(&raw)?;
        let raw_effective = if seed_override >= 0 {
            cfg.run.seed = Some(seed_override as u64);
            format!("{raw}\n# effective overrides: seed={}\n", seed_override)
        } else {
            raw
        };
        let bundle = run_protocol(&cfg, &raw_effective)?;
        bundle.write_to(Path::new(&dir))?;
        Ok(EmbexpStatus::Ok)
    })
}

/// Release a dataset handle.
///
/// # Safety
/// `ds` must be null or a handle produced by `embexp_dataset_load`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn embexp_dataset_free(ds: *mut EmbexpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Release a string produced by this library.
///
/// # Safety
/// `s` must be null or a string returned through an out-pointer by this
/// library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn embexp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
