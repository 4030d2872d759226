use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use equimix_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        eqx_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn ising(n: usize, beta: f64) -> *mut EqxModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { eqx_model_ising(n, beta, &mut m) }, EqxStatus::Ok);
    m
}

#[test]
fn infinite_temperature_lumped_gap() {
    // beta = 0 naive chain: 1 - lambda_1 = 2/N and the walk is periodic
    let m = ising(10, 0.0);
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(eqx_kernel_build(m, EqxChain::Naive, EqxSpace::Lumped, &mut k), EqxStatus::Ok);
        assert_eq!(eqx_kernel_size(k), 11);
        let mut g = EqxGap::default();
        assert_eq!(eqx_kernel_gap(k, &mut g), EqxStatus::Ok);
        assert!((g.one_minus_lambda1 - 0.2).abs() < 1e-12);
        assert!(g.gap.abs() < 1e-12);
        eqx_kernel_free(k);
        eqx_model_free(m);
    }
}

#[test]
fn dense_rows_sum_to_one_and_balance() {
    let mut m = ptr::null_mut();
    let mut k = ptr::null_mut();
    unsafe {
        assert_eq!(eqx_model_beg(6, 1.0, 1.0, &mut m), EqxStatus::Ok);
        assert_eq!(eqx_model_set_mixture(m, 0.4, 0.3), EqxStatus::Ok);
        assert_eq!(eqx_kernel_build(m, EqxChain::EquiEnergy, EqxSpace::Projected, &mut k), EqxStatus::Ok);
        let n = eqx_kernel_size(k);
        let mut p = vec![0.0; n * n];
        let mut pi = vec![0.0; n];
        assert_eq!(eqx_kernel_dense(k, p.as_mut_ptr(), p.len()), EqxStatus::Ok);
        assert_eq!(eqx_kernel_stationary(k, pi.as_mut_ptr(), n), EqxStatus::Ok);
        for i in 0..n {
            let s: f64 = p[i * n..(i + 1) * n].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for j in 0..n {
                assert!((pi[i] * p[i * n + j] - pi[j] * p[j * n + i]).abs() < 1e-14);
            }
        }
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(eqx_kernel_dense(k, p.as_mut_ptr(), n), EqxStatus::BufferTooSmall);
        assert!(last_error().contains("need"));
        eqx_kernel_free(k);
        eqx_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(eqx_model_ising(7, 1.0, &mut m), EqxStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(last_error().contains("even"));
        assert_eq!(eqx_model_ising(8, 1.0, ptr::null_mut()), EqxStatus::NullPointer);
        assert_eq!(eqx_kernel_gap(ptr::null(), ptr::null_mut()), EqxStatus::NullPointer);
        let m = ising(8, 1.0);
        assert_eq!(eqx_model_set_mixture(m, 0.7, 0.5), EqxStatus::InvalidArgument);
        let mut k = ptr::null_mut();
        assert_eq!(eqx_kernel_build(m, EqxChain::SmallWorld, EqxSpace::Full, &mut k), EqxStatus::InvalidArgument);
        assert_eq!(eqx_kernel_build(m, EqxChain::Naive, EqxSpace::Full, &mut k), EqxStatus::Ok);
        assert!(last_error().is_empty());
        assert_eq!(eqx_kernel_size(k), 256);
        assert_eq!(eqx_kernel_size(ptr::null()), 0);
        eqx_kernel_free(k);
        eqx_model_free(m);
        eqx_model_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates() {
    unsafe {
        let mut m = ptr::null_mut();
        eqx_model_ising(3, 1.0, &mut m);
        let full = eqx_last_error(ptr::null_mut(), 0);
        let mut buf = [1 as std::ffi::c_char; 5];
        assert_eq!(eqx_last_error(buf.as_mut_ptr(), 5), full);
        assert_eq!(buf[4], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 4);
    }
}

#[test]
fn simulation_is_seeded() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(eqx_model_warmup(10, 2.0, 0.3, &mut m), EqxStatus::Ok);
        let mut a = EqxEstimate::default();
        let mut b = EqxEstimate::default();
        let run = |out: &mut EqxEstimate| {
            eqx_simulate(m, EqxChain::SmallWorld, EqxObservable::Positive, 200_000, 9, 0, out)
        };
        assert_eq!(run(&mut a), EqxStatus::Ok);
        assert_eq!(run(&mut b), EqxStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(a.samples, 180_000);
        assert!((a.estimate - 0.5).abs() < 0.1);
        assert_eq!(
            eqx_simulate(m, EqxChain::SmallWorld, EqxObservable::Quadrupole, 1000, 1, 0, &mut a),
            EqxStatus::InvalidArgument
        );
        eqx_model_free(m);
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = format!("{dir}/include/equimix.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["eqx_model_ising", "eqx_kernel_build", "eqx_kernel_gap", "eqx_last_error", "eqx_simulate"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"equimix.h\"\nint main(void) { EqxModel *m = 0; EqxGap g; (void)g;\n\
         return eqx_model_ising(4, 1.0, &m) == EQX_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
