//! Component/box/port skeleton shared by recursive state machines and
//! recursive hybrid automata.
//!
//! Names are global: nodes, boxes and components are each drawn from one
//! namespace across the whole machine. Locations are nodes, call ports
//! `(b, en)` and return ports `(b, ex)`, written `node:n`, `call:b:en` and
//! `ret:b:ex` in every external format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxId(pub u32);

pub type TransitionId = usize;

/// Pseudo-action taken at call ports.
pub const CALL_ACTION: &str = "call";
/// Pseudo-action taken at exit nodes with a pending call.
pub const RETURN_ACTION: &str = "return";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Node(NodeId),
    Call(BoxId, NodeId),
    Ret(BoxId, NodeId),
}

/// How the semantics treats a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationKind {
    CallPort,
    Exit,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub entries: Vec<NodeId>,
    pub exits: Vec<NodeId>,
    pub boxes: Vec<BoxId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub component: ComponentId,
    pub is_entry: bool,
    pub is_exit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDecl {
    pub name: String,
    pub component: ComponentId,
    pub callee: ComponentId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub component: ComponentId,
    pub from: Location,
    pub action: String,
    pub to: Location,
}

/// One structural problem, phrased with the offending names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Issue(pub String);

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("model is malformed: {}", join_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("partition is not total: no owner for {0}")]
    PartitionNotTotal(String),
    #[error("{0}")]
    Other(String),
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| i.0.as_str()).collect::<Vec<_>>().join("; ")
}

/// Name-level description of one component, as accepted by the builder.
#[derive(Debug, Clone, Default)]
pub struct ComponentSpec {
    pub name: String,
    pub nodes: Vec<String>,
    pub entries: Vec<String>,
    pub exits: Vec<String>,
    /// `(box name, callee component name)`
    pub boxes: Vec<(String, String)>,
    /// `(from, action, to)` with locations in string form.
    pub transitions: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    components: Vec<Component>,
    nodes: Vec<Node>,
    boxes: Vec<BoxDecl>,
    transitions: Vec<Transition>,
    outgoing: HashMap<Location, Vec<TransitionId>>,
    component_index: HashMap<String, ComponentId>,
    node_index: HashMap<String, NodeId>,
    box_index: HashMap<String, BoxId>,
    // Non-fatal problems found while resolving names; reported by `validate`.
    deferred: Vec<Issue>,
}

impl Structure {
    /// Resolves names into an indexed structure. Ambiguous or dangling names
    /// are fatal; invariant violations are left for [`Structure::validate`].
    pub fn build(specs: &[ComponentSpec]) -> Result<Structure, ModelError> {
        let mut fatal = Vec::new();
        let mut deferred = Vec::new();
        let mut s = Structure {
            components: Vec::new(),
            nodes: Vec::new(),
            boxes: Vec::new(),
            transitions: Vec::new(),
            outgoing: HashMap::new(),
            component_index: HashMap::new(),
            node_index: HashMap::new(),
            box_index: HashMap::new(),
            deferred: Vec::new(),
        };

        for (ci, spec) in specs.iter().enumerate() {
            let cid = ComponentId(ci as u32);
            if s.component_index.insert(spec.name.clone(), cid).is_some() {
                fatal.push(Issue(format!("duplicate component name {:?}", spec.name)));
            }
            check_name(&spec.name, &mut deferred);
            let mut comp = Component {
                name: spec.name.clone(),
                nodes: Vec::new(),
                entries: Vec::new(),
                exits: Vec::new(),
                boxes: Vec::new(),
            };
            let declared: BTreeSet<&str> = spec.nodes.iter().map(String::as_str).collect();
            let mut all_nodes: Vec<&str> = spec.nodes.iter().map(String::as_str).collect();
            for extra in spec.entries.iter().chain(&spec.exits) {
                if !declared.contains(extra.as_str()) {
                    deferred.push(Issue(format!(
                        "component {}: entry/exit {:?} is not listed among its nodes",
                        spec.name, extra
                    )));
                    if !all_nodes.contains(&extra.as_str()) {
                        all_nodes.push(extra);
                    }
                }
            }
            for name in all_nodes {
                check_name(name, &mut deferred);
                let nid = NodeId(s.nodes.len() as u32);
                if s.node_index.insert(name.to_string(), nid).is_some() {
                    fatal.push(Issue(format!("duplicate node name {name:?}")));
                    continue;
                }
                s.nodes.push(Node {
                    name: name.to_string(),
                    component: cid,
                    is_entry: spec.entries.iter().any(|e| e == name),
                    is_exit: spec.exits.iter().any(|e| e == name),
                });
                comp.nodes.push(nid);
            }
            for e in &spec.entries {
                if let Some(&n) = s.node_index.get(e) {
                    if !comp.entries.contains(&n) {
                        comp.entries.push(n);
                    }
                }
            }
            for e in &spec.exits {
                if let Some(&n) = s.node_index.get(e) {
                    if !comp.exits.contains(&n) {
                        comp.exits.push(n);
                    }
                }
            }
            s.components.push(comp);
        }

        for (ci, spec) in specs.iter().enumerate() {
            let cid = ComponentId(ci as u32);
            for (bname, callee) in &spec.boxes {
                check_name(bname, &mut deferred);
                let Some(&callee_id) = s.component_index.get(callee) else {
                    fatal.push(Issue(format!("box {bname:?} calls unknown component {callee:?}")));
                    continue;
                };
                let bid = BoxId(s.boxes.len() as u32);
                if s.box_index.insert(bname.clone(), bid).is_some() {
                    fatal.push(Issue(format!("duplicate box name {bname:?}")));
                    continue;
                }
                s.boxes.push(BoxDecl {
                    name: bname.clone(),
                    component: cid,
                    callee: callee_id,
                });
                s.components[ci].boxes.push(bid);
            }
        }

        if !fatal.is_empty() {
            return Err(ModelError::Invalid(fatal));
        }

        for (ci, spec) in specs.iter().enumerate() {
            let cid = ComponentId(ci as u32);
            for (from, action, to) in &spec.transitions {
                let parsed = (s.parse_location(from), s.parse_location(to));
                match parsed {
                    (Ok(f), Ok(t)) => {
                        let id = s.transitions.len();
                        s.transitions.push(Transition {
                            component: cid,
                            from: f,
                            action: action.clone(),
                            to: t,
                        });
                        s.outgoing.entry(f).or_default().push(id);
                    }
                    (f, t) => {
                        for e in [f.err(), t.err()].into_iter().flatten() {
                            fatal.push(Issue(format!("component {}: {e}", spec.name)));
                        }
                    }
                }
            }
        }
        if !fatal.is_empty() {
            return Err(ModelError::Invalid(fatal));
        }
        s.deferred = deferred;
        Ok(s)
    }

    /// Every structural invariant violation, with names.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = self.deferred.clone();
        for comp in &self.components {
            for e in &comp.entries {
                if comp.exits.contains(e) {
                    issues.push(Issue(format!(
                        "component {}: node {} is both an entry and an exit",
                        comp.name,
                        self.node(*e).name
                    )));
                }
            }
        }
        let mut seen: BTreeMap<(Location, &str), TransitionId> = BTreeMap::new();
        for (id, t) in self.transitions.iter().enumerate() {
            let cname = &self.components[t.component.0 as usize].name;
            match self.kind(t.from) {
                LocationKind::CallPort => issues.push(Issue(format!(
                    "component {cname}: call port {} has an outgoing transition",
                    self.location_name(t.from)
                ))),
                LocationKind::Exit => issues.push(Issue(format!(
                    "component {cname}: exit node {} has an outgoing transition",
                    self.location_name(t.from)
                ))),
                LocationKind::Internal => {}
            }
            for loc in [t.from, t.to] {
                if self.component_of(loc) != t.component {
                    issues.push(Issue(format!(
                        "component {cname}: transition uses {} which belongs to component {}",
                        self.location_name(loc),
                        self.components[self.component_of(loc).0 as usize].name
                    )));
                }
            }
            if let Some(prev) = seen.insert((t.from, t.action.as_str()), id) {
                if self.transitions[prev].to != t.to {
                    issues.push(Issue(format!(
                        "component {cname}: action {} at {} has two successors",
                        t.action,
                        self.location_name(t.from)
                    )));
                }
            }
        }
        issues.sort();
        issues.dedup();
        issues
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, id: ComponentId) -> &Component {
        &self.components[id.0 as usize]
    }

    pub fn component_ids(&self) -> impl Iterator<Item = ComponentId> {
        (0..self.components.len() as u32).map(ComponentId)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn nodes_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn box_decl(&self, id: BoxId) -> &BoxDecl {
        &self.boxes[id.0 as usize]
    }

    pub fn boxes(&self) -> &[BoxDecl] {
        &self.boxes
    }

    pub fn box_ids(&self) -> impl Iterator<Item = BoxId> {
        (0..self.boxes.len() as u32).map(BoxId)
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Outgoing transitions of a location, in declaration order.
    pub fn outgoing(&self, loc: Location) -> &[TransitionId] {
        self.outgoing.get(&loc).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn find_transition(&self, loc: Location, action: &str) -> Option<TransitionId> {
        self.outgoing(loc)
            .iter()
            .copied()
            .find(|&t| self.transitions[t].action == action)
    }

    pub fn component_by_name(&self, name: &str) -> Option<ComponentId> {
        self.component_index.get(name).copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn box_by_name(&self, name: &str) -> Option<BoxId> {
        self.box_index.get(name).copied()
    }

    pub fn component_of(&self, loc: Location) -> ComponentId {
        match loc {
            Location::Node(n) => self.node(n).component,
            Location::Call(b, _) | Location::Ret(b, _) => self.box_decl(b).component,
        }
    }

    pub fn kind(&self, loc: Location) -> LocationKind {
        match loc {
            Location::Call(..) => LocationKind::CallPort,
            Location::Node(n) if self.node(n).is_exit => LocationKind::Exit,
            _ => LocationKind::Internal,
        }
    }

    pub fn is_exit(&self, loc: Location) -> bool {
        matches!(loc, Location::Node(n) if self.node(n).is_exit)
    }

    /// `Q_i` in a fixed order: nodes, then per box its call ports and return ports.
    pub fn locations_of(&self, comp: ComponentId) -> Vec<Location> {
        let c = self.component(comp);
        let mut out: Vec<Location> = c.nodes.iter().map(|&n| Location::Node(n)).collect();
        for &b in &c.boxes {
            let callee = self.component(self.box_decl(b).callee);
            out.extend(callee.entries.iter().map(|&en| Location::Call(b, en)));
            out.extend(callee.exits.iter().map(|&ex| Location::Ret(b, ex)));
        }
        out
    }

    /// `Q`, component by component.
    pub fn all_locations(&self) -> Vec<Location> {
        self.component_ids().flat_map(|c| self.locations_of(c)).collect()
    }

    pub fn location_name(&self, loc: Location) -> String {
        match loc {
            Location::Node(n) => format!("node:{}", self.node(n).name),
            Location::Call(b, n) => format!("call:{}:{}", self.box_decl(b).name, self.node(n).name),
            Location::Ret(b, n) => format!("ret:{}:{}", self.box_decl(b).name, self.node(n).name),
        }
    }

    /// Parses `node:n`, `call:b:en` or `ret:b:ex`. A bare name is read as a node.
    pub fn parse_location(&self, text: &str) -> Result<Location, ModelError> {
        let unknown = || ModelError::UnknownLocation(text.to_string());
        let parts: Vec<&str> = text.split(':').collect();
        let node = |name: &str| self.node_by_name(name).ok_or_else(unknown);
        let port = |b: &str, n: &str, entry: bool| -> Result<(BoxId, NodeId), ModelError> {
            let b = self.box_by_name(b).ok_or_else(unknown)?;
            let n = node(n)?;
            let callee = self.component(self.box_decl(b).callee);
            let ok = if entry {
                callee.entries.contains(&n)
            } else {
                callee.exits.contains(&n)
            };
            if ok {
                Ok((b, n))
            } else {
                Err(unknown())
            }
        };
        match parts.as_slice() {
            [name] | ["node", name] => Ok(Location::Node(node(name)?)),
            ["call", b, n] => port(b, n, true).map(|(b, n)| Location::Call(b, n)),
            ["ret", b, n] => port(b, n, false).map(|(b, n)| Location::Ret(b, n)),
            _ => Err(unknown()),
        }
    }

    /// Component call graph edges `caller -> callee`, deduplicated.
    pub fn call_graph(&self) -> BTreeMap<ComponentId, BTreeSet<ComponentId>> {
        let mut g: BTreeMap<ComponentId, BTreeSet<ComponentId>> =
            self.component_ids().map(|c| (c, BTreeSet::new())).collect();
        for b in &self.boxes {
            g.entry(b.component).or_default().insert(b.callee);
        }
        g
    }

    /// Callees-first order when the call graph is acyclic (self-calls count
    /// as cycles).
    pub fn callee_first_order(&self) -> Option<Vec<ComponentId>> {
        let g = self.call_graph();
        let mut state: BTreeMap<ComponentId, u8> = BTreeMap::new();
        let mut order = Vec::new();
        fn visit(
            c: ComponentId,
            g: &BTreeMap<ComponentId, BTreeSet<ComponentId>>,
            state: &mut BTreeMap<ComponentId, u8>,
            order: &mut Vec<ComponentId>,
        ) -> bool {
            match state.get(&c) {
                Some(2) => return true,
                Some(1) => return false,
                _ => {}
            }
            state.insert(c, 1);
            for &d in &g[&c] {
                if !visit(d, g, state, order) {
                    return false;
                }
            }
            state.insert(c, 2);
            order.push(c);
            true
        }
        for c in self.component_ids() {
            if !visit(c, &g, &mut state, &mut order) {
                return None;
            }
        }
        Some(order)
    }
}

fn check_name(name: &str, issues: &mut Vec<Issue>) {
    if name.is_empty() || name.contains(':') {
        issues.push(Issue(format!("name {name:?} must be non-empty and must not contain ':'")));
    }
}
