use dragonlab_core::bench::bench_mitigation;
use dragonlab_core::campaign::{run_campaign, synthetic_dictionary, CampaignConfig};
use dragonlab_core::derive::Profile;
use dragonlab_core::sidechannel::NoiseModel;

#[test]
fn noiseless_sixteen_identities_recover_the_password() {
    let dict = synthetic_dictionary(1000, 61);
    let cfg = CampaignConfig {
        noise: NoiseModel::zero(),
        seed: 61,
        ..CampaignConfig::new(Profile::IWD_SAE, "s3cret-pass", 16, 1)
    };
    let r = run_campaign(&cfg, &dict).unwrap();
    assert!(r.success);
    assert_eq!(r.survivors, vec!["s3cret-pass".to_string()]);
    assert!(r.traces.iter().all(|t| t.consistent));
}

#[test]
fn noisy_collection_shape_and_replay() {
    let dict = synthetic_dictionary(300, 62);
    let cfg = CampaignConfig { seed: 62, ..CampaignConfig::new(Profile::IWD_SAE, "another-one", 10, 15) };
    let a = run_campaign(&cfg, &dict).unwrap();
    assert_eq!(a.totals.samples, 150);
    assert_eq!(a.traces.len() + a.totals.derivation_failures, 10);
    assert!(a.traces.iter().all(|t| t.report.samples_total == 15));
    let b = run_campaign(&CampaignConfig { shards: 3, ..cfg }, &dict).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    if a.totals.wrong_leaks == 0 && !a.leaks.is_empty() {
        assert!(a.survivors.contains(&"another-one".to_string()));
    }
}

#[test]
fn eap_campaign_uses_one_session_per_sample() {
    let dict = synthetic_dictionary(200, 63);
    let cfg = CampaignConfig {
        noise: NoiseModel::zero(),
        seed: 63,
        ..CampaignConfig::new(Profile::EAP_PWD, "radius-pw", 4, 4)
    };
    let r = run_campaign(&cfg, &dict).unwrap();
    assert_eq!(r.totals.samples, 16);
    assert!(r.leaks.iter().all(|l| l.token.is_some()));
    assert!(r.success);
}

#[test]
fn invalid_configs_are_rejected() {
    let dict = synthetic_dictionary(10, 64);
    assert!(run_campaign(&CampaignConfig::new(Profile::IWD_SAE, "x", 0, 1), &dict).is_err());
    assert!(run_campaign(&CampaignConfig::new(Profile::IWD_SAE, "x", 1, 0), &dict).is_err());
}

#[test]
fn early_exit_cost_grows_with_iteration() {
    let r = bench_mitigation(&Profile::EAP_PWD, 300, 65).unwrap();
    assert!(r.fingerprints_constant);
    assert!(r.elements_agree);
    let by = &r.vulnerable_by_iteration;
    let first = by.iter().find(|t| t.success_iteration == 1).unwrap();
    let later = by.iter().find(|t| t.success_iteration >= 3).unwrap();
    assert!(later.mean_ns > first.mean_ns, "{by:?}");
}
