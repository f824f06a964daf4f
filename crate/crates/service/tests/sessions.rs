mod common;

use graphguide::graph::edge_index;
use graphguide::sampler::ConstraintFile;
use graphguide::KernelKind;
use graphguide_service::session::{read_event_log, replay, ConstraintEdit, CreateSession, Session, SessionStatus};
use graphguide_service::{ServiceError, SessionManager};

fn request(seed: u64) -> CreateSession {
    CreateSession { seed, ..Default::default() }
}

#[test]
fn bit_one_session_starts_full_minus_forbidden() {
    let sampler = common::sampler(KernelKind::BitOne);
    let constraints = ConstraintFile { n: 10, forbid: vec![[0, 1], [2, 7]], ..Default::default() };
    let s = Session::create(&sampler, "a", CreateSession { constraints: Some(constraints), ..request(1) }).unwrap();
    let g = s.graph();
    assert_eq!(g.num_edges(), 45 - 2);
    assert!(!g.has_edge(0, 1) && !g.has_edge(2, 7));
    assert_eq!(s.state().t, common::STEPS);
}

#[test]
fn identical_requests_give_identical_sessions() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let mut a = Session::create(&sampler, "a", request(9)).unwrap();
    let mut b = Session::create(&sampler, "b", request(9)).unwrap();
    assert_eq!(a.graph(), b.graph());
    a.step(&sampler, 5).unwrap();
    b.step(&sampler, 5).unwrap();
    assert_eq!(a.graph(), b.graph());
}

#[test]
fn overlapping_locks_are_rejected() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let constraints = ConstraintFile { n: 10, require: vec![[1, 2]], forbid: vec![[2, 1]], ..Default::default() };
    let err = Session::create(&sampler, "a", CreateSession { constraints: Some(constraints), ..request(1) });
    assert!(matches!(err, Err(ServiceError::Core(graphguide::Error::InvalidConstraints(_)))));
}

#[test]
fn steps_compose() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let mut a = Session::create(&sampler, "a", request(3)).unwrap();
    let mut b = Session::create(&sampler, "b", request(3)).unwrap();
    a.step(&sampler, 1).unwrap();
    let ra = a.step(&sampler, 1).unwrap();
    let rb = b.step(&sampler, 2).unwrap();
    assert_eq!(ra.graph, rb.graph);
    assert_eq!(ra.probs, rb.probs);
    assert_eq!(ra.t, common::STEPS - 2);
}

#[test]
fn session_matches_cli_chain_zero() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let mut s = Session::create(&sampler, "a", request(77)).unwrap();
    let done = s.step(&sampler, common::STEPS + 10).unwrap();
    assert_eq!(done.status, SessionStatus::Finished);
    assert_eq!(done.steps_taken, common::STEPS);
    let (g, _) = sampler.sample_one(77, 0, None, None, None).unwrap();
    assert_eq!(s.graph(), &g);
    assert!(matches!(s.step(&sampler, 1), Err(ServiceError::Finished(_))));
    assert!(matches!(s.update_constraints(ConstraintEdit::default()), Err(ServiceError::Finished(_))));
}

#[test]
fn mid_run_lock_holds_in_every_later_state() {
    let sampler = common::sampler(KernelKind::BitFlip);
    for seed in 0..5 {
        let mut s = Session::create(&sampler, "a", request(seed)).unwrap();
        s.step(&sampler, common::STEPS / 2).unwrap();
        let lock_t = s.state().t;
        let up = s
            .update_constraints(ConstraintEdit { add_require: vec![[0, 9]], add_forbid: vec![[1, 2]], ..Default::default() })
            .unwrap();
        assert!(up.graph.edge_list.contains(&[0, 9]) && !up.graph.edge_list.contains(&[1, 2]));
        while s.status() == SessionStatus::Active {
            let r = s.step(&sampler, 3).unwrap();
            assert!(r.graph.edge_list.contains(&[0, 9]));
            assert!(!r.graph.edge_list.contains(&[1, 2]));
        }
        for e in s.trajectory().entries.iter().filter(|e| e.t < lock_t) {
            assert!(e.edges.contains(&[0, 9]) && !e.edges.contains(&[1, 2]), "t = {}", e.t);
        }
        assert!(s.constraints().is_satisfied_by(s.graph().edges()));
    }
}

#[test]
fn locking_present_edge_changes_nothing() {
    let sampler = common::sampler(KernelKind::BitOne);
    let mut s = Session::create(&sampler, "a", request(4)).unwrap();
    let before = s.graph().clone();
    let up = s.update_constraints(ConstraintEdit { add_require: vec![[3, 4]], ..Default::default() }).unwrap();
    assert_eq!(up.repairs, 0);
    assert_eq!(s.graph(), &before);
    assert_eq!(up.constraints.require, vec![[3, 4]]);
}

#[test]
fn conflicting_edit_leaves_state_unchanged() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let mut s = Session::create(&sampler, "a", request(4)).unwrap();
    s.update_constraints(ConstraintEdit { add_require: vec![[3, 4]], ..Default::default() }).unwrap();
    let before = s.state();
    let bad = ConstraintEdit { add_forbid: vec![[0, 1], [4, 3]], ..Default::default() };
    assert!(s.update_constraints(bad).is_err());
    assert_eq!(s.state(), before);
}

#[test]
fn removed_lock_lets_the_edge_move_again() {
    let sampler = common::sampler(KernelKind::BitFlip);
    let locked = edge_index(0, 1, 10).unwrap();
    let mut toggled = false;
    for seed in 0..20 {
        let constraints = ConstraintFile { n: 10, forbid: vec![[0, 1]], ..Default::default() };
        let mut s = Session::create(&sampler, "a", CreateSession { constraints: Some(constraints), ..request(seed) }).unwrap();
        s.step(&sampler, 4).unwrap();
        s.update_constraints(ConstraintEdit { remove: vec![[1, 0]], ..Default::default() }).unwrap();
        assert!(s.constraints().is_empty());
        while s.status() == SessionStatus::Active {
            s.step(&sampler, 1).unwrap();
            toggled |= s.graph().edges().get(locked);
        }
        let replayed = replay(&sampler, "r", s.events()).unwrap();
        assert_eq!(replayed.graph(), s.graph());
        toggled |= replayed.trajectory().entries.iter().any(|e| e.edges.contains(&[0, 1]));
    }
    assert!(toggled, "edge never reappeared after its lock was removed");
}

#[test]
fn event_log_replays_edited_session() {
    let dir = tempfile::tempdir().unwrap();
    let manager = SessionManager::new(common::sampler(KernelKind::BitZero)).with_event_log(dir.path()).unwrap();
    let state = manager.create(CreateSession { n_nodes: Some(10), ..request(12) }).unwrap();
    let id = state.id.clone();
    manager.step(&id, 7).unwrap();
    manager.update_constraints(&id, ConstraintEdit { add_require: vec![[2, 5]], ..Default::default() }).unwrap();
    manager.step(&id, 11).unwrap();
    manager.update_constraints(&id, ConstraintEdit { remove: vec![[2, 5]], add_forbid: vec![[0, 3]], ..Default::default() }).unwrap();
    manager.step(&id, 100).unwrap();
    let final_state = manager.state(&id).unwrap();
    assert_eq!(final_state.status, SessionStatus::Finished);

    let events = read_event_log(manager.event_log_path(&id).unwrap()).unwrap();
    assert_eq!(events, manager.events(&id).unwrap());
    let replayed = replay(manager.sampler(), &id, &events).unwrap();
    assert_eq!(replayed.state(), final_state);
    assert_eq!(replayed.trajectory(), manager.trajectory(&id).unwrap());
}

#[test]
fn unknown_session_is_not_found() {
    let manager = SessionManager::new(common::sampler(KernelKind::BitFlip));
    assert!(matches!(manager.step("missing", 1), Err(ServiceError::NotFound(_))));
}
