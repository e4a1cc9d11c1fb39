use boundary_walk::verify::bundle::{doob_bundle, pairings, run_bundle, transfer_bundle, Bundle, BundleConfig};
use boundary_walk::{CheckStatus, Rational};

fn reduced() -> BundleConfig<Rational> {
    BundleConfig { samples: 20_000, ray_samples: 20_000, seed: 11, ..BundleConfig::default() }
}

#[test]
fn transfer_and_doob_pass_at_reduced_size() {
    let config = reduced();
    let pairs = pairings(&config).unwrap();
    for r in transfer_bundle(&config, &pairs).unwrap().into_iter().chain(doob_bundle(&config, &pairs).unwrap()) {
        assert!(r.passed(), "{r}");
        assert!(r.max_residual <= r.tolerance);
    }
}

#[test]
fn tiny_doob_bundle_is_inconclusive() {
    let config = BundleConfig { samples: 10, ..reduced() };
    let reports = run_bundle(Bundle::Doob, &config).unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r.status == CheckStatus::Inconclusive));
}

#[test]
fn short_rays_make_cylinder_checks_inconclusive() {
    let config = BundleConfig { ray_length: 3, ray_samples: 200, ..reduced() };
    let pairs = pairings(&config).unwrap();
    let reports = transfer_bundle(&config, &pairs).unwrap();
    let cylinder: Vec<_> = reports.iter().filter(|r| r.name.contains("cylinder")).collect();
    assert!(!cylinder.is_empty());
    assert!(cylinder.iter().all(|r| r.status == CheckStatus::Inconclusive), "{:?}", cylinder);
}

#[test]
fn float_mode_identities_pass() {
    for r in run_bundle(Bundle::Identities, &BundleConfig::<f64>::default()).unwrap() {
        assert!(r.passed(), "{r}");
    }
}
