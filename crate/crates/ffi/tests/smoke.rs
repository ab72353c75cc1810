//! End-to-end smoke tests through the C ABI, including a full protocol run.

use std::ffi::{CStr, CString};
use std::path::PathBuf;

use embexp_ffi::{
    embexp_dataset_free, embexp_dataset_len, embexp_dataset_load, embexp_dataset_summarize,
    embexp_last_error, embexp_run_protocol, embexp_string_free, embexp_version, EmbexpDataset,
    EmbexpStatus,
};

fn data_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fev.csv")
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(embexp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_handle_lifecycle() {
    let path = CString::new(data_path().to_str().unwrap()).unwrap();
    let mut handle: *mut EmbexpDataset = std::ptr::null_mut();
    let st = unsafe { embexp_dataset_load(path.as_ptr(), std::ptr::null(), &mut handle) };
    assert_eq!(st, EmbexpStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { embexp_dataset_len(handle, &mut n) }, EmbexpStatus::Ok);
    assert_eq!(n, 654);
    let mut json: *mut std::ffi::c_char = std::ptr::null_mut();
    assert_eq!(
        unsafe { embexp_dataset_summarize(handle, &mut json) },
        EmbexpStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(v["n"], 654);
    assert!((v["treated_fraction"].as_f64().unwrap() - 0.0994).abs() < 1e-3);
    unsafe {
        embexp_string_free(json);
        embexp_dataset_free(handle);
    }
}

#[test]
fn run_protocol_through_the_abi() {
    let dir = std::env::temp_dir().join(format!("embexp_ffi_run_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_text = format!(
        r#"
[input]
path = "{}"

[design]
method = "trim"

[[design.trim_rules]]
sex = "female"
age_range = [10.0, 18.0]
height_range = [60.0, 69.0]

[[design.trim_rules]]
sex = "male"
age_range = [9.0, 18.0]
height_range = [58.0, 72.0]

[[analysis]]
method = "crude"

[run]
seed = 3
draws = 50
"#,
        data_path().display()
    );
    let cfg = dir.join("protocol.toml");
    std::fs::write(&cfg, cfg_text).unwrap();
    let c_cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let out_dir = dir.join("out");
    let c_out = CString::new(out_dir.to_str().unwrap()).unwrap();
    let st = unsafe { embexp_run_protocol(c_cfg.as_ptr(), c_out.as_ptr(), -1) };
    assert_eq!(st, EmbexpStatus::Ok, "{:?}", unsafe {
        CStr::from_ptr(embexp_last_error())
    });
    for name in ["design.json", "lock.json", "balance.json", "inference.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let design: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("design.json")).unwrap()).unwrap();
    assert_eq!(design["retained"].as_array().unwrap().len(), 361);
}

#[test]
fn bad_config_reports_config_status() {
    let dir = std::env::temp_dir().join(format!("embexp_ffi_bad_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "not really toml [").unwrap();
    let c_cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let c_out = CString::new(dir.join("o").to_str().unwrap()).unwrap();
    let st = unsafe { embexp_run_protocol(c_cfg.as_ptr(), c_out.as_ptr(), -1) };
    assert_eq!(st, EmbexpStatus::Config);
    let msg = unsafe { CStr::from_ptr(embexp_last_error()) };
    assert!(!msg.to_bytes().is_empty());
}
