//! Planar modular bodies: decoding from a rewritten symbol string and the
//! six morphological descriptors.
//!
//! The body is a tree of modules on an integer grid, rooted at the core in
//! cell `(0, 0)` facing `+y`. Decoding walks the string like a turtle: a
//! module symbol places a module on the current slot of the current module
//! and moves the cursor onto it, a mount command picks the slot, and
//! back-to-parent moves the cursor one step toward the core. Placements into
//! occupied cells, or past the module cap, are skipped.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::lsystem::{Occurrence, Symbol, Traced};

pub const MAX_MODULES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    Core,
    Brick,
    ActiveHinge,
}

impl ModuleKind {
    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Core => "core",
            ModuleKind::Brick => "brick",
            ModuleKind::ActiveHinge => "hinge",
        }
    }
}

/// Attachment slot relative to the parent's heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Front,
    Left,
    Right,
}

impl Face {
    pub const ALL: [Face; 3] = [Face::Front, Face::Left, Face::Right];

    pub fn name(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Left => "left",
            Face::Right => "right",
        }
    }
}

/// Absolute grid direction. `North` is the core's heading (`+y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub fn offset(self) -> GridPos {
        match self {
            Heading::North => GridPos::new(0, 1),
            Heading::East => GridPos::new(1, 0),
            Heading::South => GridPos::new(0, -1),
            Heading::West => GridPos::new(-1, 0),
        }
    }

    pub fn turn(self, face: Face) -> Heading {
        use Heading::*;
        match (face, self) {
            (Face::Front, h) => h,
            (Face::Left, North) => West,
            (Face::Left, West) => South,
            (Face::Left, South) => East,
            (Face::Left, East) => North,
            (Face::Right, North) => East,
            (Face::Right, East) => South,
            (Face::Right, South) => West,
            (Face::Right, West) => North,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
}

impl GridPos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    fn step(self, h: Heading) -> Self {
        let d = h.offset();
        Self::new(self.x + d.x, self.y + d.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub kind: ModuleKind,
    pub grid_pos: GridPos,
    pub heading: Heading,
    pub parent: Option<usize>,
    pub face: Option<Face>,
    pub joint_index: Option<usize>,
    /// Rule-body slot that produced this module, when decoded from a genotype.
    pub origin: Option<Occurrence<Symbol>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    /// Module symbols were present but none besides the core could be placed.
    #[error("no module besides the core could be placed")]
    EmptyBody,
}

/// Tree of modules rooted at the core. Module ids are placement order, so a
/// parent always precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPlan {
    modules: Vec<Module>,
    n_joints: usize,
    max_modules: usize,
}

impl Default for BodyPlan {
    fn default() -> Self {
        Self::core_only()
    }
}

impl BodyPlan {
    pub fn core_only() -> Self {
        Self::with_limit(MAX_MODULES)
    }

    pub fn with_limit(max_modules: usize) -> Self {
        Self {
            modules: vec![Module {
                kind: ModuleKind::Core,
                grid_pos: GridPos::new(0, 0),
                heading: Heading::North,
                parent: None,
                face: None,
                joint_index: None,
                origin: None,
            }],
            n_joints: 0,
            max_modules,
        }
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn module_at(&self, pos: GridPos) -> Option<usize> {
        self.modules.iter().position(|m| m.grid_pos == pos)
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.modules
            .iter()
            .enumerate()
            .filter(move |(_, m)| m.parent == Some(id))
            .map(|(i, _)| i)
    }

    /// Places a new module on `face` of `parent`. Returns `None` when the
    /// cell is taken or the body is full.
    pub fn attach(&mut self, parent: usize, face: Face, kind: ModuleKind) -> Option<usize> {
        self.attach_from(parent, face, kind, None)
    }

    fn attach_from(
        &mut self,
        parent: usize,
        face: Face,
        kind: ModuleKind,
        origin: Option<Occurrence<Symbol>>,
    ) -> Option<usize> {
        assert!(kind != ModuleKind::Core, "a body has exactly one core");
        if self.modules.len() >= self.max_modules {
            return None;
        }
        let p = &self.modules[parent];
        let heading = p.heading.turn(face);
        let pos = p.grid_pos.step(heading);
        if self.module_at(pos).is_some() {
            return None;
        }
        let joint_index = (kind == ModuleKind::ActiveHinge).then(|| {
            self.n_joints += 1;
            self.n_joints - 1
        });
        self.modules.push(Module {
            kind,
            grid_pos: pos,
            heading,
            parent: Some(parent),
            face: Some(face),
            joint_index,
            origin,
        });
        Some(self.modules.len() - 1)
    }

    /// Hinge module ids in joint-index order.
    pub fn joints(&self) -> impl Iterator<Item = usize> + '_ {
        self.modules
            .iter()
            .enumerate()
            .filter(|(_, m)| m.joint_index.is_some())
            .map(|(i, _)| i)
    }

    /// `(width, length)` of the bounding box in cells; width runs across the
    /// core's heading.
    pub fn bounding_box(&self) -> (usize, usize) {
        let (mut x0, mut x1, mut y0, mut y1) = (0, 0, 0, 0);
        for m in &self.modules {
            x0 = x0.min(m.grid_pos.x);
            x1 = x1.max(m.grid_pos.x);
            y0 = y0.min(m.grid_pos.y);
            y1 = y1.max(m.grid_pos.y);
        }
        ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize)
    }

    pub fn descriptors(&self) -> DescriptorVector {
        descriptors(self)
    }

    /// One module per line: `id kind x y parent face`; `-` marks absent
    /// values on the core.
    pub fn export(&self) -> String {
        let mut out = String::from("id kind x y parent face\n");
        for (id, m) in self.modules.iter().enumerate() {
            let parent = m.parent.map_or("-".to_string(), |p| p.to_string());
            let face = m.face.map_or("-", Face::name);
            let _ = writeln!(
                out,
                "{id} {} {} {} {parent} {face}",
                m.kind.name(),
                m.grid_pos.x,
                m.grid_pos.y
            );
        }
        out
    }
}

impl fmt::Display for BodyPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.export())
    }
}

pub fn decode(symbols: &[Symbol]) -> Result<BodyPlan, DecodeError> {
    let traced: Vec<_> = symbols
        .iter()
        .map(|&symbol| Traced {
            symbol,
            origin: None,
        })
        .collect();
    decode_traced(&traced, MAX_MODULES)
}

/// Decodes a rewritten string, recording each module's originating slot.
pub fn decode_traced(
    symbols: &[Traced<Symbol>],
    max_modules: usize,
) -> Result<BodyPlan, DecodeError> {
    let mut body = BodyPlan::with_limit(max_modules);
    let mut rest = symbols;
    if let Some(first) = symbols.first() {
        if first.symbol == Symbol::Core {
            body.modules[0].origin = first.origin;
            rest = &symbols[1..];
        }
    }
    let mut cursor = 0usize;
    let mut face = Face::Front;
    let mut saw_module = false;
    for t in rest {
        let kind = match t.symbol {
            Symbol::MountFront => {
                face = Face::Front;
                continue;
            }
            Symbol::MountLeft => {
                face = Face::Left;
                continue;
            }
            Symbol::MountRight => {
                face = Face::Right;
                continue;
            }
            Symbol::Back => {
                cursor = body.modules[cursor].parent.unwrap_or(0);
                face = Face::Front;
                continue;
            }
            Symbol::Core => {
                saw_module = true;
                continue;
            }
            Symbol::Brick => ModuleKind::Brick,
            Symbol::Hinge => ModuleKind::ActiveHinge,
        };
        saw_module = true;
        if let Some(id) = body.attach_from(cursor, face, kind, t.origin) {
            cursor = id;
            face = Face::Front;
        }
    }
    if saw_module && body.len() == 1 {
        return Err(DecodeError::EmptyBody);
    }
    Ok(body)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescriptorVector {
    pub absolute_size: usize,
    pub width: usize,
    pub proportion: f64,
    pub n_bricks: usize,
    pub rel_limbs: f64,
    pub n_active_hinges: usize,
}

impl DescriptorVector {
    pub const NAMES: [&'static str; 6] = [
        "absolute_size",
        "width",
        "proportion",
        "n_bricks",
        "rel_limbs",
        "n_active_hinges",
    ];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.absolute_size as f64,
            self.width as f64,
            self.proportion,
            self.n_bricks as f64,
            self.rel_limbs,
            self.n_active_hinges as f64,
        ]
    }
}

/// Most single-attachment modules a body of `m` modules can have.
pub fn max_limbs(m: usize) -> usize {
    if m >= 6 {
        let e = m - 6;
        2 * (e / 3) + e % 3 + 4
    } else {
        m.saturating_sub(1)
    }
}

pub fn descriptors(body: &BodyPlan) -> DescriptorVector {
    let m = body.len();
    let mut n_children = vec![0usize; m];
    for p in body.modules.iter().filter_map(|md| md.parent) {
        n_children[p] += 1;
    }
    let n_bricks = body
        .modules
        .iter()
        .filter(|md| md.kind == ModuleKind::Brick)
        .count();
    // a non-core module always has its parent attached, so one face means no children
    let limbs = (1..m).filter(|&i| n_children[i] == 0).count();
    let l_max = max_limbs(m);
    let rel_limbs = if l_max > 0 {
        limbs as f64 / l_max as f64
    } else {
        0.0
    };
    let (width, length) = body.bounding_box();
    DescriptorVector {
        absolute_size: m,
        width,
        proportion: width.min(length) as f64 / width.max(length) as f64,
        n_bricks,
        rel_limbs,
        n_active_hinges: body.n_joints(),
    }
}
