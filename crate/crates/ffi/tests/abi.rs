use std::ffi::{CStr, CString};
use std::ptr;

use proxnet_ffi::*;

const CONTRACTIVE: &str = r#"
[[network.layers]]
rows = 1
cols = 1
weights = [0.5]
bias = [1.0]
activation = "identity"

[schedule]
mode = "constant"
lambda = 1.0
"#;

const TWO_LAYER: &str = r#"
[[network.layers]]
rows = 3
cols = 2
weights = [0.5, 0.1, -0.2, 0.3, 0.0, 0.4]
bias = [0.1, 0.0, -0.1]
activation = "tanh"

[[network.layers]]
rows = 2
cols = 3
weights = [0.3, 0.2, 0.0, -0.1, 0.4, 0.2]
bias = [0.5, -0.5]
activation = { separable = ["relu", "satlin"] }
"#;

struct Handle(*mut ProxnetExperiment);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { proxnet_experiment_free(self.0) }
    }
}

fn parse(text: &str) -> Handle {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { proxnet_experiment_parse(c.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(status, ProxnetStatus::Ok, "{}", last_error());
    assert!(!out.is_null());
    Handle(out)
}

fn last_error() -> String {
    let p = proxnet_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}

#[test]
fn certify_and_run_contractive() {
    let h = parse(CONTRACTIVE);
    let mut cert = ProxnetCertificate { certified: false, alpha: 0.0, condition: ProxnetCondition::None, eta: 0.0, mu: 0.0 };
    assert_eq!(unsafe { proxnet_certify(h.0, &mut cert) }, ProxnetStatus::Ok);
    assert!(cert.certified);
    assert_eq!(cert.alpha, 0.5);
    assert_eq!(cert.condition, ProxnetCondition::NormBound);
    assert!(cert.eta.is_nan());

    let mut x = [f64::NAN];
    let mut s = ProxnetRunSummary { status: ProxnetRunStatus::Diverged, iterations: 0, residual: 0.0 };
    assert_eq!(unsafe { proxnet_run(h.0, ptr::null(), 0, x.as_mut_ptr(), &mut s) }, ProxnetStatus::Ok);
    assert_eq!(s.status, ProxnetRunStatus::Converged);
    assert!((x[0] - 2.0).abs() <= 2e-10);
    assert!(s.residual <= 1e-10);
}

#[test]
fn forward_lift_and_residual_agree() {
    let h = parse(TWO_LAYER);
    let (dim, block) = unsafe { (proxnet_experiment_dim(h.0), proxnet_experiment_block_len(h.0)) };
    assert_eq!((dim, block), (2, 5));
    assert_eq!(unsafe { proxnet_experiment_depth(h.0) }, 2);

    let x = [0.3, -0.7];
    let mut y = [0.0; 2];
    assert_eq!(unsafe { proxnet_forward(h.0, x.as_ptr(), 2, y.as_mut_ptr(), 2) }, ProxnetStatus::Ok);
    let mut lifted = [0.0; 5];
    assert_eq!(unsafe { proxnet_lift_point(h.0, x.as_ptr(), 2, lifted.as_mut_ptr(), 5) }, ProxnetStatus::Ok);
    assert_eq!(&lifted[3..], &x);
    let mut res = f64::NAN;
    assert_eq!(unsafe { proxnet_vi_residual(h.0, lifted.as_ptr(), 5, &mut res) }, ProxnetStatus::Ok);
    let direct = ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt();
    assert!((res - direct).abs() <= 1e-14);

    let mut mono = ProxnetMonotonicity { monotone: false, max_eigenvalue: 0.0, margin: 0.0 };
    assert_eq!(unsafe { proxnet_monotonicity(h.0, &mut mono) }, ProxnetStatus::Ok);
    assert!(mono.monotone);
    assert!((mono.margin - (2.0 - mono.max_eigenvalue)).abs() <= 1e-15);
}

#[test]
fn errors_carry_codes_and_messages() {
    let h = parse(CONTRACTIVE);
    let x = [0.0; 3];
    let mut y = [0.0; 3];
    let s = unsafe { proxnet_forward(h.0, x.as_ptr(), 3, y.as_mut_ptr(), 3) };
    assert_eq!(s, ProxnetStatus::DimensionMismatch);
    assert!(last_error().contains("dimension mismatch"));

    let s = unsafe { proxnet_forward(ptr::null(), x.as_ptr(), 1, y.as_mut_ptr(), 1) };
    assert_eq!(s, ProxnetStatus::NullPointer);

    let bad = CString::new("[[network.layers]]\nrows = 1\n").unwrap();
    let mut out = ptr::null_mut();
    let s = unsafe { proxnet_experiment_parse(bad.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(s, ProxnetStatus::Config);
    assert!(out.is_null());

    let missing = CString::new("/nonexistent/proxnet.toml").unwrap();
    let s = unsafe { proxnet_experiment_load(missing.as_ptr(), &mut out) };
    assert_ne!(s, ProxnetStatus::Ok);
    assert!(out.is_null());

    let text = unsafe { CStr::from_ptr(proxnet_status_str(ProxnetStatus::Config)) };
    assert_eq!(text.to_str().unwrap(), "config error");
}

#[test]
fn activation_handles() {
    let key = CString::new("scale(0.5,2,tanh)").unwrap();
    let mut act = ptr::null_mut();
    assert_eq!(unsafe { proxnet_activation_parse(key.as_ptr(), &mut act) }, ProxnetStatus::Ok);
    let v = unsafe { proxnet_activation_eval(act, 0.7) };
    assert!((v - 0.5 * (1.4f64).tanh()).abs() <= 1e-15);
    unsafe { proxnet_activation_free(act) };

    let key = CString::new("softsign").unwrap();
    let mut act = ptr::null_mut();
    assert_eq!(unsafe { proxnet_activation_parse(key.as_ptr(), &mut act) }, ProxnetStatus::InvalidParameter);
    assert!(act.is_null());

    let key = CString::new("arcsinh").unwrap();
    assert_eq!(unsafe { proxnet_activation_parse(key.as_ptr(), &mut act) }, ProxnetStatus::Ok);
    let mut p = f64::NAN;
    assert_eq!(unsafe { proxnet_activation_prox(act, 3.0, 1e-10, &mut p) }, ProxnetStatus::Ok);
    assert!((p - 3.0f64.asinh()).abs() <= 1e-6);
    unsafe { proxnet_activation_free(act) };
    assert!(unsafe { proxnet_activation_eval(ptr::null(), 1.0) }.is_nan());
}

#[test]
fn load_resolves_relative_weight_files() {
    let dir = std::env::temp_dir().join(format!("proxnet-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("w.txt"), "0.25\n").unwrap();
    std::fs::write(
        dir.join("exp.toml"),
        "[[network.layers]]\nrows = 1\ncols = 1\nweights_file = \"w.txt\"\nactivation = \"identity\"\n",
    )
    .unwrap();
    let path = CString::new(dir.join("exp.toml").to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { proxnet_experiment_load(path.as_ptr(), &mut out) }, ProxnetStatus::Ok, "{}", last_error());
    let h = Handle(out);
    let x = [4.0];
    let mut y = [0.0];
    assert_eq!(unsafe { proxnet_forward(h.0, x.as_ptr(), 1, y.as_mut_ptr(), 1) }, ProxnetStatus::Ok);
    assert_eq!(y[0], 1.0);
    std::fs::remove_dir_all(&dir).unwrap();
}
