//! One simulated world driven by client messages.

use ids_core::disambiguation::{select_disambiguation_mode, DisambiguationResult};
use ids_core::inference::{Predictor, PredictorKind};
use ids_core::model::ControlCommand;
use ids_core::simulation::log::{Event, StepRecord, TrialLog};
use ids_core::simulation::trial::{advance, TrialConfig, WorldState};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::protocol::{ClientMessage, GoalInfo, ServerFrame, StateFrame};

/// Full-scale axis speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    /// m/s
    pub translational: f64,
    /// rad/s
    pub rotational: f64,
}

/// Messages applied at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickMessages {
    pub tick: u64,
    pub messages: Vec<ClientMessage>,
}

/// Everything needed to replay a session offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session: Uuid,
    pub config: TrialConfig,
    pub scale: AxisScale,
    pub ticks: u64,
    /// Only ticks that carried messages.
    pub entries: Vec<TickMessages>,
}

#[derive(Debug)]
pub struct Session {
    id: Uuid,
    config: TrialConfig,
    scale: AxisScale,
    predictor: Predictor,
    world: WorldState,
    held: ControlCommand,
    pending: Vec<ClientMessage>,
    last_alpha: f64,
    last_disamb: Option<DisambiguationResult>,
    goal_reached: bool,
    frozen: bool,
    ticks: u64,
    log: TrialLog,
    entries: Vec<TickMessages>,
}

impl Session {
    /// The loop always runs the field predictor with assistance; the simulated
    /// operator settings in `config` are unused.
    pub fn new(id: Uuid, mut config: TrialConfig, scale: AxisScale) -> ids_core::Result<Self> {
        config.predictor = PredictorKind::Field;
        config.validate()?;
        let predictor = config.build_predictor();
        let world = WorldState::initial(&config)?;
        let log = TrialLog::new(config.scene.goal_count());
        Ok(Self {
            id,
            config,
            scale,
            predictor,
            world,
            held: ControlCommand::zero(),
            pending: Vec::new(),
            last_alpha: 0.0,
            last_disamb: None,
            goal_reached: false,
            frozen: false,
            ticks: 0,
            log,
            entries: Vec::new(),
        })
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn goal_reached(&self) -> bool {
        self.goal_reached
    }

    /// Queues a validated message for the next tick.
    pub fn enqueue(&mut self, msg: ClientMessage) {
        self.pending.push(msg);
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            session: self.id,
            config: self.config.clone(),
            scale: self.scale,
            ticks: self.ticks,
            entries: self.entries.clone(),
        }
    }

    /// Maps axis values onto the current mode's dimensions; the rest stay zero.
    pub fn map_axes(&self, axes: &[f64]) -> ControlCommand {
        let mut v = [0.0; 6];
        if let Some(mode) = self.config.interface.mode(self.world.current_mode) {
            for (k, a) in mode.dimensions.iter().zip(axes) {
                let speed = if k.is_translational() {
                    self.scale.translational
                } else {
                    self.scale.rotational
                };
                v[k.index()] = a * speed;
            }
        }
        ControlCommand::from_array(v)
    }

    fn apply(&mut self, msg: &ClientMessage, events: &mut Vec<Event>) -> ids_core::Result<()> {
        match msg {
            ClientMessage::Command { axes } => self.held = self.map_axes(axes),
            ClientMessage::ModeSwitch => {
                let from = self.world.current_mode;
                let to = self.config.interface.next_mode(from);
                self.world.current_mode = to;
                // Held axes refer to the old mode.
                self.held = ControlCommand::zero();
                events.push(Event::ManualModeSwitch { from, to });
            }
            ClientMessage::Disambiguate => {
                let c = &self.config;
                let result = select_disambiguation_mode(
                    &self.world.belief,
                    &self.world.pose,
                    &c.interface,
                    self.world.current_mode,
                    &c.disamb,
                    &c.field,
                    &c.scene,
                    &c.potential_field,
                )?;
                if result.m_star != self.world.current_mode {
                    self.held = ControlCommand::zero();
                }
                self.world.current_mode = result.m_star;
                self.last_disamb = Some(result.clone());
                events.push(Event::DisambiguationRequest {
                    result: Box::new(result),
                });
            }
            ClientMessage::Reset { seed } => {
                self.config.seed = *seed;
                self.world = WorldState::initial(&self.config)?;
                self.held = ControlCommand::zero();
                self.last_alpha = 0.0;
                self.last_disamb = None;
                self.goal_reached = false;
                events.push(Event::Reset { seed: *seed });
            }
        }
        Ok(())
    }

    /// Applies queued messages, runs one loop iteration and reports the state.
    /// Returns an error frame once on numerical failure and nothing afterwards.
    pub fn tick(&mut self) -> Option<ServerFrame> {
        if self.frozen {
            return None;
        }
        let tick = self.ticks;
        self.ticks += 1;
        let messages = std::mem::take(&mut self.pending);
        if !messages.is_empty() {
            self.entries.push(TickMessages {
                tick,
                messages: messages.clone(),
            });
        }
        match self.step(&messages) {
            Ok(()) => Some(ServerFrame::State(Box::new(self.frame()))),
            Err(e) => {
                self.frozen = true;
                Some(ServerFrame::error(format!("session frozen: {e}")))
            }
        }
    }

    fn step(&mut self, messages: &[ClientMessage]) -> ids_core::Result<()> {
        let mut events = Vec::new();
        for msg in messages {
            self.apply(msg, &mut events)?;
        }
        if self.goal_reached {
            return Ok(());
        }
        let u_h = self.held;
        let outcome = advance(&mut self.world, &u_h, &self.config, &self.predictor)?;
        self.last_alpha = outcome.alpha;
        self.log.records.push(StepRecord {
            t: self.time(),
            pose: self.world.pose,
            u_h,
            u_a: outcome.u_a,
            u: outcome.u,
            alpha: outcome.alpha,
            belief: self.world.belief.clone(),
            current_mode: self.world.current_mode,
            ground_truth_goal: None,
            events,
        });
        let reach = self.config.reach;
        if self.config.scene.goals.iter().any(|g| reach.reached(&self.world.pose, g)) {
            self.goal_reached = true;
        }
        Ok(())
    }

    fn time(&self) -> f64 {
        self.ticks as f64 * self.config.dt
    }

    pub fn frame(&self) -> StateFrame {
        let mode_dimensions = self
            .config
            .interface
            .mode(self.world.current_mode)
            .map(|m| m.dimensions.iter().map(|d| d.name().to_string()).collect())
            .unwrap_or_default();
        StateFrame {
            t: self.time(),
            pose: self.world.pose,
            belief: self.world.belief.as_slice().to_vec(),
            alpha: self.last_alpha,
            mode: self.world.current_mode,
            mode_dimensions,
            goals: self.config.scene.goals.iter().map(GoalInfo::from).collect(),
            disamb: self.last_disamb.clone(),
            goal_reached: self.goal_reached,
        }
    }
}

/// Feeds a recorded transcript through a fresh session and returns its log.
pub fn replay(transcript: &Transcript) -> ids_core::Result<TrialLog> {
    let mut session = Session::new(transcript.session, transcript.config.clone(), transcript.scale)?;
    let mut entries = transcript.entries.iter().peekable();
    for tick in 0..transcript.ticks {
        while let Some(entry) = entries.next_if(|e| e.tick == tick) {
            for msg in &entry.messages {
                session.enqueue(msg.clone());
            }
        }
        session.tick();
    }
    Ok(session.log)
}
