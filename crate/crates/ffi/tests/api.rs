use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use oakcrowd_ffi::*;

const DATA: &str = concat!(
    r#"{"item":"1","worker":"a","arrival":0,"label":{"kind":"cat","v":"A"}}"#, "\n",
    r#"{"item":"1","worker":"b","arrival":1,"label":{"kind":"cat","v":"A"}}"#, "\n",
    r#"{"item":"1","worker":"c","arrival":2,"label":{"kind":"cat","v":"B"}}"#, "\n",
    r#"{"item":"2","worker":"a","arrival":0,"label":{"kind":"cat","v":"B"}}"#, "\n",
    r#"{"item":"2","worker":"b","arrival":1,"label":{"kind":"cat","v":"B"}}"#, "\n",
    r#"{"item":"2","worker":"c","arrival":2,"label":{"kind":"cat","v":"B"}}"#, "\n",
    r#"{"item":"3","worker":"c","arrival":0,"label":{"kind":"cat","v":"A"}}"#, "\n",
    r#"{"item":"3","worker":"a","arrival":1,"label":{"kind":"cat","v":"A"}}"#, "\n",
    r#"{"item":"1","z":{"kind":"cat","v":"A"}}"#, "\n",
    r#"{"item":"2","z":{"kind":"cat","v":"B"}}"#, "\n",
);

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(oak_last_error_message()) }.to_str().unwrap().to_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    oak_string_free(s);
    out
}

fn trained(options: Option<&str>) -> *mut OakModel {
    let data = c(DATA);
    let opts = options.map(c);
    let mut model = ptr::null_mut();
    let status = unsafe { oak_train_jsonl(data.as_ptr(), opts.as_ref().map_or(ptr::null(), |o| o.as_ptr()), &mut model) };
    assert_eq!(status, OakStatus::Ok, "{}", last_error());
    assert!(!model.is_null());
    model
}

#[test]
fn train_serialize_and_reload() {
    let model = trained(Some(r#"{"estimator":"poak-irt","multipoint":2}"#));
    unsafe {
        let mut json = ptr::null_mut();
        assert_eq!(oak_model_to_json(model, &mut json), OakStatus::Ok);
        let text = take(json);
        assert!(text.contains("poak-irt"));

        let reparsed = c(&text);
        let mut again = ptr::null_mut();
        assert_eq!(oak_model_from_json(reparsed.as_ptr(), &mut again), OakStatus::Ok);
        let mut json2 = ptr::null_mut();
        assert_eq!(oak_model_to_json(again, &mut json2), OakStatus::Ok);
        assert_eq!(take(json2), text);
        oak_model_free(again);
        oak_model_free(model);
    }
}

#[test]
fn estimate_and_confidence() {
    let model = trained(Some(r#"{"estimator":"poak"}"#));
    unsafe {
        let data = c(DATA);
        let taus = [0.99, 0.99, 1.0];
        let mut out = ptr::null_mut();
        assert_eq!(oak_estimate_jsonl(model, data.as_ptr(), taus.as_ptr(), taus.len(), &mut out), OakStatus::Ok);
        let lines = take(out);
        assert_eq!(lines.lines().count(), 3);
        for line in lines.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!((0.0..=1.0).contains(&v["confidence"].as_f64().unwrap()));
        }

        let (worker, label) = (c("a"), c(r#"{"kind":"cat","v":"A"}"#));
        let mut conf = -1.0;
        assert_eq!(oak_worker_confidence(model, worker.as_ptr(), label.as_ptr(), &mut conf), OakStatus::Ok);
        assert!((0.0..=1.0).contains(&conf));
        assert_eq!(oak_worker_confidence(model, worker.as_ptr(), ptr::null(), &mut conf), OakStatus::Ok);
        assert!((0.0..=1.0).contains(&conf));
        oak_model_free(model);
    }
}

#[test]
fn similarity() {
    let (sim, a, b) = (
        c(r#"{"fn":"jaccard"}"#),
        c(r#"{"kind":"set","v":["x","y"]}"#),
        c(r#"{"kind":"set","v":["y","z"]}"#),
    );
    let mut out = 0.0;
    assert_eq!(unsafe { oak_similarity(sim.as_ptr(), a.as_ptr(), b.as_ptr(), &mut out) }, OakStatus::Ok);
    assert!((out - 1.0 / 3.0).abs() < 1e-12);

    let cat = c(r#"{"kind":"cat","v":"A"}"#);
    assert_eq!(unsafe { oak_similarity(sim.as_ptr(), a.as_ptr(), cat.as_ptr(), &mut out) }, OakStatus::Validation);
    assert!(last_error().contains("mismatch"));
}

#[test]
fn error_codes() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(oak_model_from_json(ptr::null(), &mut model), OakStatus::NullPointer);
        assert!(model.is_null());
        assert!(!last_error().is_empty());

        let bad = c("{not json");
        assert_eq!(oak_model_from_json(bad.as_ptr(), &mut model), OakStatus::Parse);
        assert_eq!(oak_train_jsonl(bad.as_ptr(), ptr::null(), &mut model), OakStatus::Parse);

        let invalid = [0xffu8, 0];
        assert_eq!(oak_model_from_json(invalid.as_ptr().cast(), &mut model), OakStatus::InvalidUtf8);

        let data = c(DATA);
        let opts = c(r#"{"lambda":3}"#);
        assert_eq!(oak_train_jsonl(data.as_ptr(), opts.as_ptr(), &mut model), OakStatus::InvalidArgument);
        let opts = c(r#"{"estimator":"best"}"#);
        assert_eq!(oak_train_jsonl(data.as_ptr(), opts.as_ptr(), &mut model), OakStatus::Parse);

        let empty = c("");
        assert_eq!(oak_train_jsonl(empty.as_ptr(), ptr::null(), &mut model), OakStatus::Degenerate);

        let oak = trained(None);
        let mut out = ptr::null_mut();
        let labels = c(DATA);
        assert_eq!(oak_estimate_jsonl(oak, labels.as_ptr(), ptr::null(), 2, &mut out), OakStatus::NullPointer);
        assert!(out.is_null());
        assert_eq!(oak_estimate_jsonl(oak, labels.as_ptr(), ptr::null(), 0, &mut out), OakStatus::Ok);
        oak_string_free(out);
        assert!(last_error().is_empty());
        assert_eq!(oak_model_to_json(ptr::null(), &mut out), OakStatus::NullPointer);
        oak_model_free(oak);
        oak_model_free(ptr::null_mut());
        oak_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c_and_cxx() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/oakcrowd.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status()
        else {
            eprintln!("{compiler} not available; skipping");
            continue;
        };
        assert!(status.success(), "{compiler} rejected the header");
    }
}
