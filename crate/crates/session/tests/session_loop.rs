use ids_core::model::{ControlDimension, Pose, Scene};
use ids_core::simulation::log::Event;
use ids_core::simulation::trial::TrialConfig;
use ids_session::protocol::{ClientMessage, ServerFrame, StateFrame};
use ids_session::session::{replay, AxisScale, Session};
use uuid::Uuid;

const SCALE: AxisScale = AxisScale {
    translational: 0.2,
    rotational: 0.5,
};

fn two_goal_config() -> TrialConfig {
    let scene = Scene::from_positions(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
    TrialConfig::with_defaults(scene, Pose::at(0.0, 0.0, 0.0)).unwrap()
}

fn session(config: TrialConfig) -> Session {
    Session::new(Uuid::new_v4(), config, SCALE).unwrap()
}

fn state(frame: Option<ServerFrame>) -> StateFrame {
    match frame {
        Some(ServerFrame::State(s)) => *s,
        other => panic!("expected a state frame, got {other:?}"),
    }
}

#[test]
fn mode_switch_is_cyclic() {
    let mut config = two_goal_config();
    config.initial_mode = 5;
    let mut s = session(config);
    s.enqueue(ClientMessage::ModeSwitch);
    assert_eq!(state(s.tick()).mode, 1);
    for _ in 0..5 {
        s.enqueue(ClientMessage::ModeSwitch);
    }
    assert_eq!(state(s.tick()).mode, 1);
}

#[test]
fn disambiguation_selects_the_x_mode() {
    let mut config = two_goal_config();
    config.initial_mode = 2;
    let mut s = session(config);
    s.enqueue(ClientMessage::Disambiguate);
    let frame = state(s.tick());
    let mode = s.config().interface.mode(frame.mode).unwrap();
    assert!(mode.contains(ControlDimension::X));
    assert!(frame.mode_dimensions.contains(&"x".to_string()));
    let disamb = frame.disamb.unwrap();
    assert_eq!(disamb.m_star, frame.mode);
    assert!(matches!(
        s.log().records[0].events.as_slice(),
        [Event::DisambiguationRequest { .. }]
    ));
}

#[test]
fn axes_outside_the_mode_are_ignored() {
    let mut config = two_goal_config();
    // {z}
    config.initial_mode = 2;
    let mut s = session(config);
    s.enqueue(ClientMessage::Command { axes: vec![1.0, 1.0, 1.0] });
    s.tick();
    let r = &s.log().records[0];
    assert_eq!(r.u_h.as_array(), [0.0, 0.0, 0.2, 0.0, 0.0, 0.0]);
    let pos = s.world().pose.position;
    assert_eq!((pos.x, pos.y), (0.0, 0.0));
    assert!(pos.z > 0.0);
}

#[test]
fn idle_belief_relaxes_to_uniform() {
    let mut s = session(two_goal_config());
    s.enqueue(ClientMessage::Command { axes: vec![0.5, 0.0] });
    for _ in 0..30 {
        s.tick();
    }
    let moved = state(s.tick()).belief;
    assert!(moved[0] > 0.55);
    s.enqueue(ClientMessage::Command { axes: vec![0.0, 0.0] });
    let mut last = Vec::new();
    for _ in 0..1000 {
        let frame = state(s.tick());
        let sum: f64 = frame.belief.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        last = frame.belief;
    }
    // The deviation contracts by (1 - dt/tau) per tick: oracle 0.99^1000.
    let bound = (moved[0] - 0.5).abs() * 0.99f64.powi(1000) + 1e-12;
    assert!((last[0] - 0.5).abs() <= bound, "{last:?} vs bound {bound}");
}

#[test]
fn zero_assistance_moves_exactly_with_the_command() {
    let mut s = session(two_goal_config());
    // Perpendicular to both goals: belief stays at 0.5 <= rho1 = 0.6.
    s.enqueue(ClientMessage::Command { axes: vec![0.0, 1.0] });
    let mut expected = s.world().pose.position;
    for _ in 0..20 {
        let frame = state(s.tick());
        expected.y += 0.2 * 0.1;
        assert_eq!(frame.alpha, 0.0);
        assert_eq!(frame.pose.position, expected);
    }
}

#[test]
fn goal_reached_stops_motion() {
    let mut s = session(two_goal_config());
    s.enqueue(ClientMessage::Command { axes: vec![1.0, 0.0] });
    let mut reached_at = None;
    for i in 0..300 {
        let frame = state(s.tick());
        if frame.goal_reached && reached_at.is_none() {
            reached_at = Some((i, frame.pose));
        }
    }
    let (_, pose) = reached_at.expect("goal never reached");
    assert!((pose.position.x - 1.0).abs() <= 0.05);
    let frame = state(s.tick());
    assert!(frame.goal_reached);
    assert_eq!(frame.pose, pose);
    let steps = s.log().len();
    s.enqueue(ClientMessage::Command { axes: vec![-1.0, 0.0] });
    s.tick();
    assert_eq!(s.log().len(), steps);
}

#[test]
fn sessions_are_isolated() {
    let mut a = session(two_goal_config());
    let mut b = session(two_goal_config());
    let mut alone = session(two_goal_config());
    for i in 0..50 {
        if i % 7 == 0 {
            a.enqueue(ClientMessage::ModeSwitch);
            b.enqueue(ClientMessage::Command { axes: vec![-1.0, 0.3] });
        }
        if i == 20 {
            a.enqueue(ClientMessage::Disambiguate);
        }
        if i % 7 == 0 {
            alone.enqueue(ClientMessage::Command { axes: vec![-1.0, 0.3] });
        }
        a.tick();
        b.tick();
        alone.tick();
    }
    assert_eq!(b.log().to_csv(), alone.log().to_csv());
    assert_ne!(a.log().to_csv(), b.log().to_csv());
}

#[test]
fn replay_reproduces_the_log() {
    let mut s = session(two_goal_config());
    let script: Vec<(u64, ClientMessage)> = vec![
        (0, ClientMessage::Command { axes: vec![0.7, 0.2] }),
        (12, ClientMessage::ModeSwitch),
        (13, ClientMessage::Command { axes: vec![-0.4] }),
        (20, ClientMessage::Disambiguate),
        (21, ClientMessage::Command { axes: vec![0.9, -0.1] }),
        (40, ClientMessage::Reset { seed: 8 }),
        (41, ClientMessage::Command { axes: vec![-0.5, 0.5] }),
    ];
    for tick in 0..80 {
        for (_, msg) in script.iter().filter(|(t, _)| *t == tick) {
            s.enqueue(msg.clone());
        }
        s.tick();
    }
    let transcript = s.transcript();
    let json = serde_json::to_string(&transcript).unwrap();
    let parsed = serde_json::from_str(&json).unwrap();
    assert_eq!(replay(&parsed).unwrap().to_csv(), s.log().to_csv());
}

#[test]
fn numerical_failure_freezes_the_session() {
    let mut config = two_goal_config();
    // Any non-uniform belief makes the decay term overflow.
    config.field.tau = 5e-324;
    let mut s = session(config);
    s.enqueue(ClientMessage::Command { axes: vec![1.0, 0.0] });
    let mut error = None;
    for _ in 0..5 {
        if let Some(ServerFrame::Error { detail }) = s.tick() {
            error = Some(detail);
            break;
        }
    }
    assert!(error.unwrap().contains("frozen"));
    assert!(s.is_frozen());
    let pose = s.world().pose;
    assert!(s.tick().is_none());
    assert_eq!(s.world().pose, pose);
}
