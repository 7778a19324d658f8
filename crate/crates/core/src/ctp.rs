//! Executable semantics of the DEMO transaction pattern.
//!
//! The machine is rule-based: [`CtpMachine::step`] decides a move from the
//! current [`Configuration`] alone. The transition table exported by
//! [`CtpMachine::transition_table`] is derived from those rules by
//! exploring every reachable configuration.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Fidelity level of the transaction pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternLevel {
    Basic,
    Standard,
    Complete,
}

impl PatternLevel {
    pub const ALL: [PatternLevel; 3] = [Self::Basic, Self::Standard, Self::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Self::Basic => "basic",
            Self::Standard => "standard",
            Self::Complete => "complete",
        }
    }
}

impl fmt::Display for PatternLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown pattern level `{0}` (expected basic, standard or complete)")]
pub struct UnknownLevel(pub String);

impl FromStr for PatternLevel {
    type Err = UnknownLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Self::Basic),
            "standard" => Ok(Self::Standard),
            "complete" => Ok(Self::Complete),
            other => Err(UnknownLevel(other.into())),
        }
    }
}

/// One of the two parties of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Initiator,
    Executor,
}

impl Party {
    pub fn counterparty(self) -> Party {
        match self {
            Party::Initiator => Party::Executor,
            Party::Executor => Party::Initiator,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Party::Initiator => 'I',
            Party::Executor => 'E',
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Initiator => "initiator",
            Party::Executor => "executor",
        })
    }
}

/// Coordination act kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActKind {
    Request,
    Promise,
    Decline,
    Declare,
    Accept,
    Reject,
    Quit,
    Stop,
    RevokeRequest,
    RevokePromise,
    RevokeDeclare,
    RevokeAccept,
    Allow,
    Refuse,
}

impl ActKind {
    pub const ALL: [ActKind; 14] = [
        Self::Request,
        Self::Promise,
        Self::Decline,
        Self::Declare,
        Self::Accept,
        Self::Reject,
        Self::Quit,
        Self::Stop,
        Self::RevokeRequest,
        Self::RevokePromise,
        Self::RevokeDeclare,
        Self::RevokeAccept,
        Self::Allow,
        Self::Refuse,
    ];

    /// The four acts that can be revoked, in rollback order.
    pub const REVOCABLE: [ActKind; 4] = [Self::Request, Self::Promise, Self::Declare, Self::Accept];

    pub fn code(self) -> &'static str {
        match self {
            Self::Request => "rq",
            Self::Promise => "pm",
            Self::Decline => "dc",
            Self::Declare => "da",
            Self::Accept => "ac",
            Self::Reject => "rj",
            Self::Quit => "qt",
            Self::Stop => "st",
            Self::RevokeRequest => "rv-rq",
            Self::RevokePromise => "rv-pm",
            Self::RevokeDeclare => "rv-da",
            Self::RevokeAccept => "rv-ac",
            Self::Allow => "al",
            Self::Refuse => "rf",
        }
    }

    pub fn from_code(code: &str) -> Option<ActKind> {
        Self::ALL.iter().copied().find(|a| a.code() == code)
    }

    /// Human-readable name, also used as the guard label of the branch that
    /// performs the act.
    pub fn name(self) -> &'static str {
        match self {
            Self::Request => "request",
            Self::Promise => "promise",
            Self::Decline => "decline",
            Self::Declare => "declare",
            Self::Accept => "accept",
            Self::Reject => "reject",
            Self::Quit => "quit",
            Self::Stop => "stop",
            Self::RevokeRequest => "revoke-request",
            Self::RevokePromise => "revoke-promise",
            Self::RevokeDeclare => "revoke-declare",
            Self::RevokeAccept => "revoke-accept",
            Self::Allow => "allow",
            Self::Refuse => "refuse",
        }
    }

    /// The party that performs this act. `None` for allow/refuse, which are
    /// performed by the counterparty of whoever revoked.
    pub fn performer(self) -> Option<Party> {
        match self {
            Self::Request | Self::Accept | Self::Reject | Self::Quit => Some(Party::Initiator),
            Self::RevokeRequest | Self::RevokeAccept => Some(Party::Initiator),
            Self::Promise | Self::Decline | Self::Declare | Self::Stop => Some(Party::Executor),
            Self::RevokePromise | Self::RevokeDeclare => Some(Party::Executor),
            Self::Allow | Self::Refuse => None,
        }
    }

    pub fn is_revoke(self) -> bool {
        self.revoked().is_some()
    }

    /// For a revoke act, the act it revokes.
    pub fn revoked(self) -> Option<ActKind> {
        match self {
            Self::RevokeRequest => Some(Self::Request),
            Self::RevokePromise => Some(Self::Promise),
            Self::RevokeDeclare => Some(Self::Declare),
            Self::RevokeAccept => Some(Self::Accept),
            _ => None,
        }
    }

    /// The revoke act for one of the four revocable acts.
    pub fn revoke_of(self) -> Option<ActKind> {
        match self {
            Self::Request => Some(Self::RevokeRequest),
            Self::Promise => Some(Self::RevokePromise),
            Self::Declare => Some(Self::RevokeDeclare),
            Self::Accept => Some(Self::RevokeAccept),
            _ => None,
        }
    }

    fn rank(self) -> Option<u8> {
        match self {
            Self::Request => Some(0),
            Self::Promise => Some(1),
            Self::Declare => Some(2),
            Self::Accept => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for ActKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Coordination states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CtpState {
    Initiated,
    Requested,
    Promised,
    Declared,
    Accepted,
    Declined,
    Rejected,
    Quit,
    Stopped,
}

impl CtpState {
    pub const ALL: [CtpState; 9] = [
        Self::Initiated,
        Self::Requested,
        Self::Promised,
        Self::Declared,
        Self::Accepted,
        Self::Declined,
        Self::Rejected,
        Self::Quit,
        Self::Stopped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Initiated => "initiated",
            Self::Requested => "requested",
            Self::Promised => "promised",
            Self::Declared => "declared",
            Self::Accepted => "accepted",
            Self::Declined => "declined",
            Self::Rejected => "rejected",
            Self::Quit => "quit",
            Self::Stopped => "stopped",
        }
    }

    pub fn from_name(name: &str) -> Option<CtpState> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// The act whose performance brings the transaction into this state,
    /// for the states that have a unique one.
    pub fn caused_by(self) -> Option<ActKind> {
        match self {
            Self::Initiated => None,
            Self::Requested => Some(ActKind::Request),
            Self::Promised => Some(ActKind::Promise),
            Self::Declared => Some(ActKind::Declare),
            Self::Accepted => Some(ActKind::Accept),
            Self::Declined => Some(ActKind::Decline),
            Self::Rejected => Some(ActKind::Reject),
            Self::Quit => Some(ActKind::Quit),
            Self::Stopped => Some(ActKind::Stop),
        }
    }
}

impl fmt::Display for CtpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which of request, promise, declare and accept have occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Occurred(u8);

impl Occurred {
    pub const NONE: Occurred = Occurred(0);

    pub fn contains(self, act: ActKind) -> bool {
        act.rank().is_some_and(|r| self.0 & (1 << r) != 0)
    }

    pub fn with(self, act: ActKind) -> Occurred {
        match act.rank() {
            Some(r) => Occurred(self.0 | (1 << r)),
            None => self,
        }
    }

    /// Clears `act` and every act ranked above it.
    pub fn cleared_from(self, act: ActKind) -> Occurred {
        match act.rank() {
            Some(r) => Occurred(self.0 & ((1u8 << r) - 1)),
            None => self,
        }
    }

    pub fn of(acts: &[ActKind]) -> Occurred {
        acts.iter().fold(Occurred::NONE, |o, a| o.with(*a))
    }

    pub fn iter(self) -> impl Iterator<Item = ActKind> {
        ActKind::REVOCABLE
            .into_iter()
            .filter(move |a| self.contains(*a))
    }
}

impl fmt::Display for Occurred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(a.code())?;
        }
        f.write_str("}")
    }
}

/// A revoke waiting for the counterparty's allow or refuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PendingRevoke {
    pub revoke: ActKind,
    pub resume: CtpState,
}

/// Run-time configuration of one transaction.
///
/// `revoke_count` counts revokes that were allowed, so a refused revoke
/// leaves the configuration exactly as it was before the revoke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub state: CtpState,
    pub occurred: Occurred,
    pub pending: Option<PendingRevoke>,
    pub revoke_count: u32,
}

impl Configuration {
    pub fn initial() -> Self {
        Configuration {
            state: CtpState::Initiated,
            occurred: Occurred::NONE,
            pending: None,
            revoke_count: 0,
        }
    }

    pub fn at(state: CtpState, occurred: &[ActKind]) -> Self {
        Configuration {
            state,
            occurred: Occurred::of(occurred),
            pending: None,
            revoke_count: 0,
        }
    }

    /// Short label used in the exported transition table.
    pub fn label(&self) -> String {
        match self.pending {
            Some(p) => alloc::format!("{}/{}", p.resume, p.revoke.code()),
            None => String::from(self.state.name()),
        }
    }
}

impl Default for Configuration {
    fn default() -> Self {
        Self::initial()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtpError {
    #[error("{party} cannot perform {act} in state {state} at level {level}")]
    InvalidAct {
        level: PatternLevel,
        state: CtpState,
        party: Party,
        act: ActKind,
    },
    #[error("{act} attempted while {pending} is pending")]
    PendingRevoke { act: ActKind, pending: ActKind },
}

/// A party performing an act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub party: Party,
    pub act: ActKind,
}

impl Step {
    pub fn new(party: Party, act: ActKind) -> Self {
        Step { party, act }
    }

    /// Step with the act's fixed performer. Panics for allow/refuse.
    pub fn by_performer(act: ActKind) -> Self {
        let party = act
            .performer()
            .expect("allow/refuse have no fixed performer");
        Step { party, act }
    }
}

impl Ord for Step {
    fn cmp(&self, other: &Self) -> Ordering {
        self.act
            .code()
            .cmp(other.act.code())
            .then(self.party.cmp(&other.party))
    }
}

impl PartialOrd for Step {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Separator between steps in the trace line format.
pub const TRACE_SEP: char = '·';

/// A finite sequence of steps. Ordered lexicographically by short codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Trace {
    pub steps: Vec<Step>,
}

impl Trace {
    pub fn new(steps: Vec<Step>) -> Self {
        Trace { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn acts(&self) -> impl Iterator<Item = ActKind> + '_ {
        self.steps.iter().map(|s| s.act)
    }

    /// Renders the trace with `I:`/`E:` party prefixes.
    pub fn with_parties(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push(TRACE_SEP);
            }
            out.push(s.party.letter());
            out.push(':');
            out.push_str(s.act.code());
        }
        out
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                write!(f, "{TRACE_SEP}")?;
            }
            f.write_str(s.act.code())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceParseError {
    #[error("unknown act code `{0}`")]
    UnknownAct(String),
    #[error("unknown party prefix `{0}`")]
    UnknownParty(String),
    #[error("`{0}` has no revoke to answer")]
    NoPendingRevoke(String),
}

impl FromStr for Trace {
    type Err = TraceParseError;

    /// Parses `rq·pm·da` or `I:rq·E:pm`. The party of an allow/refuse
    /// without a prefix is the counterparty of the most recent revoke.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut steps = Vec::new();
        if s.is_empty() {
            return Ok(Trace { steps });
        }
        let mut last_revoker: Option<Party> = None;
        for token in s.split(TRACE_SEP) {
            let token = token.trim();
            let (party, code) = match token.split_once(':') {
                Some((p, c)) => {
                    let party = match p {
                        "I" | "i" => Party::Initiator,
                        "E" | "e" => Party::Executor,
                        other => return Err(TraceParseError::UnknownParty(other.into())),
                    };
                    (Some(party), c)
                }
                None => (None, token),
            };
            let act =
                ActKind::from_code(code).ok_or_else(|| TraceParseError::UnknownAct(code.into()))?;
            let party = match (party, act.performer()) {
                (Some(p), _) => p,
                (None, Some(p)) => p,
                (None, None) => last_revoker
                    .map(Party::counterparty)
                    .ok_or_else(|| TraceParseError::NoPendingRevoke(code.into()))?,
            };
            if act.is_revoke() {
                last_revoker = Some(party);
            }
            steps.push(Step { party, act });
        }
        Ok(Trace { steps })
    }
}

/// One row of the exported transition table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransitionRow {
    pub from: String,
    pub party: Party,
    pub act: ActKind,
    pub to: String,
}

/// The transaction pattern at a given level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtpMachine {
    level: PatternLevel,
    states: Vec<CtpState>,
    transitions: Vec<TransitionRow>,
}

/// Builds the machine for `level`.
pub fn build_ctp(level: PatternLevel) -> CtpMachine {
    let states = match level {
        PatternLevel::Basic => alloc::vec![
            CtpState::Initiated,
            CtpState::Requested,
            CtpState::Promised,
            CtpState::Declared,
            CtpState::Accepted,
        ],
        PatternLevel::Standard => CtpState::ALL.to_vec(),
        PatternLevel::Complete => CtpState::ALL
            .iter()
            .copied()
            .filter(|s| !matches!(s, CtpState::Quit | CtpState::Stopped))
            .collect(),
    };
    let mut machine = CtpMachine {
        level,
        states,
        transitions: Vec::new(),
    };
    machine.transitions = machine.derive_table();
    machine
}

impl CtpMachine {
    pub fn level(&self) -> PatternLevel {
        self.level
    }

    pub fn states(&self) -> &[CtpState] {
        &self.states
    }

    pub fn transitions(&self) -> &[TransitionRow] {
        &self.transitions
    }

    pub fn initial(&self) -> Configuration {
        Configuration::initial()
    }

    /// Where an allowed revoke of the given kind rolls the transaction back to.
    pub fn rollback_target(revoke: ActKind) -> Option<CtpState> {
        match revoke {
            ActKind::RevokeRequest => Some(CtpState::Initiated),
            ActKind::RevokePromise => Some(CtpState::Requested),
            ActKind::RevokeDeclare => Some(CtpState::Promised),
            ActKind::RevokeAccept => Some(CtpState::Rejected),
            _ => None,
        }
    }

    /// Acts that appear in at least one transition at this level.
    pub fn alphabet(&self) -> BTreeSet<ActKind> {
        self.transitions.iter().map(|t| t.act).collect()
    }

    pub fn step(
        &self,
        config: &Configuration,
        party: Party,
        act: ActKind,
    ) -> Result<Configuration, CtpError> {
        let invalid = || CtpError::InvalidAct {
            level: self.level,
            state: config.state,
            party,
            act,
        };

        if let Some(pending) = config.pending {
            let replier = pending
                .revoke
                .performer()
                .map(Party::counterparty)
                .ok_or_else(invalid)?;
            return match act {
                ActKind::Allow if party == replier => {
                    let revoked = pending.revoke.revoked().ok_or_else(invalid)?;
                    let target = Self::rollback_target(pending.revoke).ok_or_else(invalid)?;
                    Ok(Configuration {
                        state: target,
                        occurred: config.occurred.cleared_from(revoked),
                        pending: None,
                        revoke_count: config.revoke_count + 1,
                    })
                }
                ActKind::Refuse if party == replier => Ok(Configuration {
                    state: pending.resume,
                    pending: None,
                    ..*config
                }),
                ActKind::Allow | ActKind::Refuse => Err(invalid()),
                _ => Err(CtpError::PendingRevoke {
                    act,
                    pending: pending.revoke,
                }),
            };
        }

        if act.performer() != Some(party) {
            return Err(invalid());
        }

        use ActKind as A;
        use CtpState as S;
        let standard = self.level >= PatternLevel::Standard;
        let complete = self.level == PatternLevel::Complete;
        let next = match (config.state, act) {
            (S::Initiated, A::Request) => S::Requested,
            (S::Requested, A::Promise) => S::Promised,
            (S::Promised, A::Declare) => S::Declared,
            (S::Declared, A::Accept) => S::Accepted,
            (S::Requested, A::Decline) if standard => S::Declined,
            (S::Declined, A::Request) if standard => S::Requested,
            (S::Declined, A::Quit) if standard && !complete => S::Quit,
            (S::Declared, A::Reject) if standard => S::Rejected,
            (S::Rejected, A::Declare) if standard => S::Declared,
            (S::Rejected, A::Stop) if standard && !complete => S::Stopped,
            (state, revoke) if complete && revoke.is_revoke() => {
                let revoked = revoke.revoked().ok_or_else(invalid)?;
                if !config.occurred.contains(revoked) || matches!(state, S::Quit | S::Stopped) {
                    return Err(invalid());
                }
                return Ok(Configuration {
                    pending: Some(PendingRevoke {
                        revoke,
                        resume: state,
                    }),
                    ..*config
                });
            }
            _ => return Err(invalid()),
        };
        Ok(Configuration {
            state: next,
            occurred: config.occurred.with(act),
            ..*config
        })
    }

    /// Every (party, act) pair for which [`step`](Self::step) succeeds,
    /// initiator first, then in act order.
    pub fn enabled_acts(&self, config: &Configuration) -> Vec<(Party, ActKind)> {
        let mut out = Vec::new();
        for party in [Party::Initiator, Party::Executor] {
            for act in ActKind::ALL {
                if self.step(config, party, act).is_ok() {
                    out.push((party, act));
                }
            }
        }
        out
    }

    pub fn is_terminal(&self, config: &Configuration) -> bool {
        config.pending.is_none()
            && matches!(
                config.state,
                CtpState::Accepted | CtpState::Quit | CtpState::Stopped
            )
    }

    /// Terminal, or (at complete level) back in `initiated` after an
    /// allowed revoke of the request. A trace may end here.
    pub fn may_stop(&self, config: &Configuration) -> bool {
        self.is_terminal(config)
            || (self.level == PatternLevel::Complete
                && config.pending.is_none()
                && config.state == CtpState::Initiated
                && config.revoke_count > 0)
    }

    /// Replays a trace from the initial configuration.
    pub fn run(&self, trace: &Trace) -> Result<Configuration, CtpError> {
        trace
            .steps
            .iter()
            .try_fold(self.initial(), |c, s| self.step(&c, s.party, s.act))
    }

    /// Whether `trace` is a complete word of this machine: it replays and
    /// ends where a trace may stop.
    pub fn accepts(&self, trace: &Trace) -> bool {
        self.run(trace).is_ok_and(|c| self.may_stop(&c))
    }

    /// All maximal traces within the given bounds, ordered by short codes.
    ///
    /// The declined→re-request and rejected→re-declare loops each iterate at
    /// most `loop_bound` times; at most `revoke_bound` revokes are fired.
    /// Paths that can neither stop nor continue within the bounds are
    /// dropped.
    pub fn enumerate_traces(&self, loop_bound: u32, revoke_bound: u32) -> Vec<Trace> {
        let bounds = TraceBounds {
            loop_bound,
            revoke_bound,
        };
        let mut out = BTreeSet::new();
        let mut path = Vec::new();
        self.explore(
            &self.initial(),
            LoopUse::default(),
            &bounds,
            &mut path,
            &mut out,
        );
        out.into_iter().collect()
    }

    fn explore(
        &self,
        config: &Configuration,
        used: LoopUse,
        bounds: &TraceBounds,
        path: &mut Vec<Step>,
        out: &mut BTreeSet<Trace>,
    ) {
        if self.may_stop(config) && !path.is_empty() {
            out.insert(Trace::new(path.clone()));
        }
        for (party, act) in self.enabled_acts(config) {
            let Some(used) = used.after(config.state, act, bounds) else {
                continue;
            };
            let next = self
                .step(config, party, act)
                .expect("enabled act must step");
            path.push(Step { party, act });
            self.explore(&next, used, bounds, path, out);
            path.pop();
        }
    }

    fn derive_table(&self) -> Vec<TransitionRow> {
        let mut seen: BTreeSet<Configuration> = BTreeSet::new();
        let mut rows: BTreeMap<(String, Party, ActKind), String> = BTreeMap::new();
        let mut queue = VecDeque::new();
        let start = self.initial();
        seen.insert(start);
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for (party, act) in self.enabled_acts(&c) {
                let mut next = self.step(&c, party, act).expect("enabled act must step");
                rows.insert((c.label(), party, act), next.label());
                // Revoke counts do not change the transition structure.
                next.revoke_count = next.revoke_count.min(1);
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        let mut out: Vec<TransitionRow> = rows
            .into_iter()
            .map(|((from, party, act), to)| TransitionRow {
                from,
                party,
                act,
                to,
            })
            .collect();
        out.sort_by(|a, b| {
            state_order(&a.from)
                .cmp(&state_order(&b.from))
                .then_with(|| a.from.cmp(&b.from))
                .then_with(|| a.party.cmp(&b.party))
                .then_with(|| a.act.cmp(&b.act))
        });
        out
    }

    /// Tab-separated transition table: state, party, act, successor.
    pub fn table_text(&self) -> String {
        let mut out = String::new();
        for row in &self.transitions {
            out.push_str(&row.from);
            out.push('\t');
            out.push_str(match row.party {
                Party::Initiator => "initiator",
                Party::Executor => "executor",
            });
            out.push('\t');
            out.push_str(row.act.code());
            out.push('\t');
            out.push_str(&row.to);
            out.push('\n');
        }
        out
    }
}

fn state_order(label: &str) -> usize {
    let base = label.split('/').next().unwrap_or(label);
    CtpState::from_name(base).map_or(usize::MAX, |s| s as usize)
}

/// Exploration limits shared by the machine and the BPMN simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceBounds {
    pub loop_bound: u32,
    pub revoke_bound: u32,
}

impl Default for TraceBounds {
    fn default() -> Self {
        TraceBounds {
            loop_bound: 2,
            revoke_bound: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LoopUse {
    re_requests: u32,
    re_declares: u32,
    revokes: u32,
}

impl LoopUse {
    fn after(mut self, from: CtpState, act: ActKind, bounds: &TraceBounds) -> Option<LoopUse> {
        match (from, act) {
            (CtpState::Declined, ActKind::Request) => {
                self.re_requests += 1;
                (self.re_requests <= bounds.loop_bound).then_some(self)
            }
            (CtpState::Rejected, ActKind::Declare) => {
                self.re_declares += 1;
                (self.re_declares <= bounds.loop_bound).then_some(self)
            }
            (_, a) if a.is_revoke() => {
                self.revokes += 1;
                (self.revokes <= bounds.revoke_bound).then_some(self)
            }
            _ => Some(self),
        }
    }
}
