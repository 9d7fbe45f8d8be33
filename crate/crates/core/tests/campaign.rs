use coded_pilot::channel::FadingModel;
use coded_pilot::design::{PilotAidedRequest, SnrGrid};
use coded_pilot::modem::DEFAULT_BICM_SEED;
use coded_pilot::sim::{
    reproduce_figure, resolve_designs, run_campaign, select_pilot_length, thread_pool,
    CampaignConfig, Figure, Scale, SearchSettings, StopRule,
};

#[test]
fn low_rate_packets_choose_longer_pilots() {
    let pool = thread_pool(0).unwrap();
    let search = SearchSettings {
        target_bler: 1e-2,
        range_db: (-2.0, 16.0),
        tol_db: 0.25,
        seed: 3,
        stop: StopRule { min_errors: 30, min_trials: 0, max_trials: 3000 },
        fading: FadingModel::UnitPhase,
        list_size: 1,
    };
    let chosen: Vec<usize> = [160, 40]
        .iter()
        .map(|&k| {
            let req = PilotAidedRequest {
                block_lengths: vec![120],
                pilot_lengths: vec![0],
                message_bits: k,
                modulation: 4,
                bicm_seed: Some(DEFAULT_BICM_SEED),
                pilot_seed: 0,
            };
            select_pilot_length(&req, &[4, 8, 16, 32], &SnrGrid::default(), &search, &pool)
                .unwrap()
                .pilot_length
        })
        .collect();
    // Low-rate packets work at low SNR, where estimation needs more pilot energy.
    assert!(chosen[1] > chosen[0], "{chosen:?}");
}

fn base_config() -> CampaignConfig {
    CampaignConfig::from_json(
        r#"{
            "scheme": "both",
            "message_bits": 80,
            "total_symbols": 120,
            "blocks": 2,
            "modulation": 4,
            "coded_pilot_symbols": [8, 8],
            "pilot_length": 4,
            "list_size": 2,
            "snr_db": [4.0],
            "min_errors": 10,
            "max_trials": 500,
            "seed": 9,
            "crc_policy": "aggregate-on-0"
        }"#,
    )
    .unwrap()
}

#[test]
fn supplied_designs_reproduce_campaign() {
    let cfg = base_config();
    let pool = thread_pool(1).unwrap();
    let report = resolve_designs(&cfg, &pool).unwrap();
    let json = report.to_json().unwrap();
    assert!(json.contains("\"coded_pilot\"") && json.contains("\"pilot_aided\""));

    let mut supplied = cfg.clone();
    supplied.split_design = Some(report.coded_pilot.as_ref().unwrap().config.clone());
    supplied.pilot_aided_design = Some(report.pilot_aided.as_ref().unwrap().config.clone());
    let text = serde_json::to_string(&supplied).unwrap();
    let reloaded = CampaignConfig::from_json(&text).unwrap();
    let (_, a) = run_campaign(&cfg, 1).unwrap();
    let (_, b) = run_campaign(&reloaded, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert_eq!(a[0].scheme, "coded-pilot");
    assert_eq!(a[1].scheme, "pilot-aided");
}

#[test]
fn invalid_configs_are_rejected_before_trials() {
    for (from, to) in [
        ("\"blocks\":2", "\"blocks\":0"),
        ("\"modulation\":4", "\"modulation\":8"),
        ("\"coded_bits\":null", "\"coded_bits\":240"),
        ("\"coded_pilot_symbols\":[8,8]", "\"coded_pilot_symbols\":[8]"),
    ] {
        let text = serde_json::to_string(&base_config()).unwrap();
        let bad = text.replace(from, to);
        assert_ne!(bad, text, "pattern {from} not found");
        assert!(CampaignConfig::from_json(&bad).is_err(), "{to}");
    }
}

#[test]
fn fig3_smoke_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = reproduce_figure(Figure::Fig3, Scale::Smoke, dir.path(), 1, 0).unwrap();
    assert_eq!(out.files.len(), 3);
    for f in &out.files {
        assert!(f.exists());
    }
    let csv = std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("coded-pilot/4qam/k")));
    assert!(out.summary.contains("crossing dega"));
}
