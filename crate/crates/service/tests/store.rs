use emobase::protocol::{random_pool, seed_profile, Questionnaire};
use emobase::rng::seeded;
use emobase_service::api::AppState;
use emobase_service::runs::{DatasetMeta, DatasetParams, RunDescriptor, RunStatus};
use emobase_service::store::Store;

#[test]
fn restart_reconstructs_state_from_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let pool = random_pool(&mut seeded(2), 5);
    {
        let store = Store::open(dir.path()).unwrap();
        store.put_pool(&pool).unwrap();
        for id in ["b", "a"] {
            store.put_profile(&seed_profile(id, Questionnaire::neutral(), &pool).unwrap()).unwrap();
        }
    }
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.subject_ids().unwrap(), vec!["a".to_string(), "b".to_string()]);
    assert_eq!(store.pool().unwrap(), pool);
    assert_eq!(store.profile("a").unwrap().subject_id, "a");
}

#[test]
fn interrupted_write_leaves_previous_version() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let profile = seed_profile("s", Questionnaire::neutral(), &[]).unwrap();
    store.put_profile(&profile).unwrap();

    // a crash between temp write and rename leaves only the temp file behind
    let subject_dir = dir.path().join("subjects/s");
    std::fs::write(subject_dir.join(".profile.json.4242.tmp"), b"{\"subject_id\": \"trunc").unwrap();
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.profile("s").unwrap(), profile);
    let leftovers: Vec<_> = std::fs::read_dir(&subject_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(leftovers, vec!["profile.json".to_string()]);
}

#[test]
fn pending_runs_fail_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let meta = DatasetMeta {
        dataset_id: "d1".into(),
        subject_id: "s".into(),
        params: DatasetParams { w: 32, min_rank: None, mask: Default::default() },
        csv_sha256: "00".into(),
        n_instances: 0,
        class_counts: Default::default(),
        sessions: vec![],
    };
    let run = RunDescriptor::new(&meta, "rf", 0, false).unwrap();
    store.put_run(&run).unwrap();
    AppState::new(Store::open(dir.path()).unwrap()).unwrap();
    let after = store.run(&run.run_id).unwrap().unwrap();
    assert_eq!(after.status, RunStatus::Failed);
    assert!(after.error.unwrap().contains("restart"));
}

#[test]
fn unusable_root_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, b"x").unwrap();
    let err = Store::open(&file).unwrap_err();
    assert!(err.to_string().contains("cannot create store"), "{err}");
}
