//! Labeled gridworlds.
//!
//! Maps are plain text: a few header directives followed by the character
//! grid. `#` is a wall, `.` is floor, any other character is a labeled
//! floor cell whose proposition comes from the legend. Movement is the
//! usual four-neighbor step; bumping a wall, the boundary, or the blocked
//! side of a one-way door leaves the agent in place. Labels fire on the
//! destination cell of a step. Sink cells absorb: every action keeps the
//! agent there (and keeps emitting the cell's label).
//!
//! ```text
//! legend: c=c s=s o=o f=f
//! start: 2,4
//! sink: f
//! oneway: 0,3 N
//! stochastic: enter b -> {b:0.9, d:0.1}
//! grid:
//! ..f.o
//! .s#..
//! ..#c.
//! .##..
//! .....
//! ```
//!
//! Coordinates are `x,y` with the origin at the top-left grid cell.
//! `oneway: x,y D` lets the agent cross from `(x,y)` to its `D`-neighbor
//! but not back. `stochastic: enter c -> {...}`: a step that would land on
//! a cell with grid character `c` instead lands on the cell of each listed
//! character with the given probability.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::alphabet::{Alphabet, Label};
use crate::ltlf::{compile_tlcd, CompileError, Tlcd, DEFAULT_MAX_STATES};

pub const MAX_WORD_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("map validation: {0}")]
    Invalid(String),
    #[error("attainable-word length {0} exceeds the cap {MAX_WORD_LEN}")]
    WordLenCap(usize),
    #[error("causal diagram compilation: {0}")]
    Compile(#[from] CompileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    North,
    South,
    East,
    West,
}

pub const ACTIONS: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::North => 0,
            Action::South => 1,
            Action::East => 2,
            Action::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Action {
        ACTIONS[i]
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Action::North => (0, -1),
            Action::South => (0, 1),
            Action::East => (1, 0),
            Action::West => (-1, 0),
        }
    }

    fn parse(s: &str) -> Option<Action> {
        match s {
            "N" => Some(Action::North),
            "S" => Some(Action::South),
            "E" => Some(Action::East),
            "W" => Some(Action::West),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Wall,
    Floor,
    /// Labeled floor cell; the index points into the proposition list.
    Labeled(usize),
}

/// A rectangular gridworld with labeled cells, sinks, one-way doors and
/// stochastic entry relocation.
#[derive(Debug, Clone)]
pub struct Gridworld {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    alphabet: Alphabet,
    /// Per-cell label bitmask over `alphabet` (0 or a single bit here,
    /// since each cell carries at most one proposition).
    label_bits: Vec<u32>,
    start: usize,
    sink: Vec<bool>,
    /// Moves `(from_cell, action)` blocked by the reverse side of a
    /// one-way door.
    blocked: HashSet<(usize, usize)>,
    /// On entering key cell: distribution over destination cells.
    relocate: HashMap<usize, Vec<(usize, f64)>>,
}

impl Gridworld {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_sink(&self, cell: usize) -> bool {
        self.sink[cell]
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.cells[cell] == Cell::Wall
    }

    pub fn cell_at(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Label of a step ending in `dest`, as a bitmask over the alphabet.
    pub fn label_bits(&self, dest: usize) -> u32 {
        self.label_bits[dest]
    }

    pub fn label(&self, dest: usize) -> Label {
        self.alphabet.label(self.label_bits[dest])
    }

    /// Where a move attempt lands before stochastic relocation.
    fn move_target(&self, cell: usize, a: Action) -> usize {
        if self.sink[cell] {
            return cell;
        }
        let (x, y) = self.coords(cell);
        let (dx, dy) = a.offset();
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
            return cell;
        }
        let next = self.cell_at(nx as usize, ny as usize);
        if self.cells[next] == Cell::Wall || self.blocked.contains(&(cell, a.index())) {
            return cell;
        }
        next
    }

    /// All possible destinations of `(cell, action)` with probabilities.
    pub fn outcomes(&self, cell: usize, a: Action) -> Vec<(usize, f64)> {
        let target = self.move_target(cell, a);
        match self.relocate.get(&target) {
            // Relocation only triggers on *entering* the trigger cell.
            Some(dist) if target != cell => dist.clone(),
            _ => vec![(target, 1.0)],
        }
    }

    /// Samples one environment step.
    pub fn step<R: Rng + ?Sized>(&self, cell: usize, a: Action, rng: &mut R) -> usize {
        let outs = self.outcomes(cell, a);
        if outs.len() == 1 {
            return outs[0].0;
        }
        let mut x: f64 = rng.gen();
        for &(dest, p) in &outs {
            x -= p;
            if x < 0.0 {
                return dest;
            }
        }
        outs.last().unwrap().0
    }

    /// All label words generated by trajectories from the start cell, of
    /// length at most `max_len` (prefix-closed; includes the empty word).
    pub fn attainable_words(&self, max_len: usize) -> Result<Vec<Vec<Label>>, EnvError> {
        if max_len > MAX_WORD_LEN {
            return Err(EnvError::WordLenCap(max_len));
        }
        let mut seen: HashMap<Vec<u32>, HashSet<usize>> = HashMap::new();
        seen.insert(Vec::new(), HashSet::from([self.start]));
        let mut frontier = vec![Vec::new()];
        let mut all: Vec<Vec<u32>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next_frontier = Vec::new();
            for word in frontier {
                let cells = seen[&word].clone();
                let mut extensions: HashMap<u32, HashSet<usize>> = HashMap::new();
                for &cell in &cells {
                    for a in ACTIONS {
                        for (dest, _) in self.outcomes(cell, a) {
                            extensions
                                .entry(self.label_bits[dest])
                                .or_default()
                                .insert(dest);
                        }
                    }
                }
                for (bits, dests) in extensions {
                    let mut w = word.clone();
                    w.push(bits);
                    match seen.get_mut(&w) {
                        Some(set) => {
                            set.extend(dests);
                        }
                        None => {
                            seen.insert(w.clone(), dests);
                            all.push(w.clone());
                            next_frontier.push(w);
                        }
                    }
                }
            }
            frontier = next_frontier;
        }
        Ok(all
            .into_iter()
            .map(|w| w.iter().map(|&b| self.alphabet.label(b)).collect())
            .collect())
    }

    /// Checks that every attainable word up to `max_len` satisfies the
    /// diagram's requirement formula, returning the shortest violating word
    /// otherwise. Implemented as reachability over (cell, automaton state);
    /// the word-enumeration oracle in the tests cross-checks it.
    pub fn tlcd_holds(&self, cd: &Tlcd, max_len: usize) -> Result<Result<(), Vec<Label>>, EnvError> {
        if max_len > MAX_WORD_LEN {
            return Err(EnvError::WordLenCap(max_len));
        }
        let dfa = compile_tlcd(cd, DEFAULT_MAX_STATES)?;
        let proj: Vec<u32> = (0..self.alphabet.n_labels() as u32)
            .map(|bits| dfa.alphabet().project(&self.alphabet.label(bits)))
            .collect();
        if !dfa.is_accepting(dfa.initial()) {
            return Ok(Err(Vec::new()));
        }
        let n_q = dfa.n_states();
        let mut seen = vec![false; self.n_cells() * n_q];
        // (cell, q, parent trail index, label bits, depth)
        let mut trail: Vec<(usize, usize, usize, u32, usize)> = Vec::new();
        let mut queue = VecDeque::new();
        seen[self.start * n_q + dfa.initial()] = true;
        trail.push((self.start, dfa.initial(), usize::MAX, 0, 0));
        queue.push_back(0usize);
        while let Some(t) = queue.pop_front() {
            let (cell, q, _, _, depth) = trail[t];
            if depth == max_len {
                continue;
            }
            for a in ACTIONS {
                for (dest, _) in self.outcomes(cell, a) {
                    let bits = self.label_bits[dest];
                    let q2 = dfa.next(q, proj[bits as usize]);
                    if !dfa.is_accepting(q2) {
                        let mut word = vec![self.alphabet.label(bits)];
                        let mut i = t;
                        while trail[i].2 != usize::MAX {
                            word.push(self.alphabet.label(trail[i].3));
                            i = trail[i].2;
                        }
                        word.reverse();
                        return Ok(Err(word));
                    }
                    if !seen[dest * n_q + q2] {
                        seen[dest * n_q + q2] = true;
                        trail.push((dest, q2, t, bits, depth + 1));
                        queue.push_back(trail.len() - 1);
                    }
                }
            }
        }
        Ok(Ok(()))
    }

    /// Parses the map format described in the module docs.
    pub fn from_text(text: &str) -> Result<Gridworld, EnvError> {
        let mut legend: HashMap<char, String> = HashMap::new();
        let mut start_xy: Option<(usize, usize)> = None;
        let mut sink_chars: HashSet<char> = HashSet::new();
        let mut oneways: Vec<(usize, usize, Action)> = Vec::new();
        let mut stochastic: Vec<(char, Vec<(char, f64)>)> = Vec::new();
        let mut grid_rows: Vec<String> = Vec::new();
        let mut in_grid = false;
        for (lineno, raw) in text.lines().enumerate() {
            let err = |msg: String| EnvError::Parse {
                line: lineno + 1,
                msg,
            };
            if in_grid {
                if raw.trim().is_empty() {
                    continue;
                }
                grid_rows.push(raw.trim_end().to_string());
                continue;
            }
            let line = match raw.find('#') {
                // `#` only starts a comment outside the grid block.
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("legend:") {
                for item in rest.split_whitespace() {
                    let (c, prop) = item
                        .split_once('=')
                        .ok_or_else(|| err(format!("bad legend item `{item}`")))?;
                    let mut chars = c.chars();
                    let (c, extra) = (chars.next(), chars.next());
                    if extra.is_some() || c.is_none() {
                        return Err(err(format!("legend key must be one character: `{item}`")));
                    }
                    legend.insert(c.unwrap(), prop.to_string());
                }
            } else if let Some(rest) = line.strip_prefix("start:") {
                let (x, y) = rest
                    .trim()
                    .split_once(',')
                    .ok_or_else(|| err("expected `start: x,y`".into()))?;
                start_xy = Some((
                    x.trim().parse().map_err(|_| err("bad start x".into()))?,
                    y.trim().parse().map_err(|_| err("bad start y".into()))?,
                ));
            } else if let Some(rest) = line.strip_prefix("sink:") {
                for c in rest.split_whitespace() {
                    let mut chars = c.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => {
                            sink_chars.insert(c);
                        }
                        _ => return Err(err(format!("sink entries are single characters: `{c}`"))),
                    }
                }
            } else if let Some(rest) = line.strip_prefix("oneway:") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(err("expected `oneway: x,y D`".into()));
                }
                let (x, y) = parts[0]
                    .split_once(',')
                    .ok_or_else(|| err("expected `oneway: x,y D`".into()))?;
                let dir = Action::parse(parts[1])
                    .ok_or_else(|| err("direction must be N, S, E or W".into()))?;
                oneways.push((
                    x.parse().map_err(|_| err("bad oneway x".into()))?,
                    y.parse().map_err(|_| err("bad oneway y".into()))?,
                    dir,
                ));
            } else if let Some(rest) = line.strip_prefix("stochastic:") {
                let rest = rest.trim();
                let rest = rest
                    .strip_prefix("enter")
                    .ok_or_else(|| err("expected `stochastic: enter c -> {..}`".into()))?;
                let (trigger, dist) = rest
                    .split_once("->")
                    .ok_or_else(|| err("expected `->` in stochastic rule".into()))?;
                let trigger = trigger.trim();
                let mut tchars = trigger.chars();
                let tc = match (tchars.next(), tchars.next()) {
                    (Some(c), None) => c,
                    _ => return Err(err("stochastic trigger must be one character".into())),
                };
                let dist = dist.trim();
                let dist = dist
                    .strip_prefix('{')
                    .and_then(|d| d.strip_suffix('}'))
                    .ok_or_else(|| err("expected `{c:p, ...}`".into()))?;
                let mut pairs = Vec::new();
                for item in dist.split(',') {
                    let (c, p) = item
                        .split_once(':')
                        .ok_or_else(|| err(format!("bad distribution item `{item}`")))?;
                    let c = c.trim();
                    let mut cchars = c.chars();
                    let cc = match (cchars.next(), cchars.next()) {
                        (Some(c), None) => c,
                        _ => return Err(err("distribution keys are single characters".into())),
                    };
                    pairs.push((
                        cc,
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| err(format!("bad probability `{p}`")))?,
                    ));
                }
                stochastic.push((tc, pairs));
            } else if line == "grid:" {
                in_grid = true;
            } else {
                return Err(err(format!("unrecognized directive `{line}`")));
            }
        }
        if grid_rows.is_empty() {
            return Err(EnvError::Invalid("map has no grid".into()));
        }
        let height = grid_rows.len();
        let width = grid_rows.iter().map(|r| r.chars().count()).max().unwrap();
        if grid_rows.iter().any(|r| r.chars().count() != width) {
            return Err(EnvError::Invalid("grid rows have unequal width".into()));
        }
        let alphabet = Alphabet::new(legend.values().cloned())
            .map_err(|e| EnvError::Invalid(e.to_string()))?;
        if let Some(c) = sink_chars.iter().find(|c| !legend.contains_key(c)) {
            return Err(EnvError::Invalid(format!("sink character `{c}` missing from legend")));
        }
        let mut cells = Vec::with_capacity(width * height);
        let mut label_bits = vec![0u32; width * height];
        let mut sink = vec![false; width * height];
        let mut char_cells: HashMap<char, Vec<usize>> = HashMap::new();
        for (y, row) in grid_rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                let idx = y * width + x;
                let cell = match c {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    c => {
                        let prop = legend.get(&c).ok_or_else(|| {
                            EnvError::Invalid(format!("grid character `{c}` missing from legend"))
                        })?;
                        let pos = alphabet.position(prop).unwrap();
                        label_bits[idx] = 1 << pos;
                        char_cells.entry(c).or_default().push(idx);
                        if sink_chars.contains(&c) {
                            sink[idx] = true;
                        }
                        Cell::Labeled(pos)
                    }
                };
                cells.push(cell);
            }
        }
        let (sx, sy) =
            start_xy.ok_or_else(|| EnvError::Invalid("missing `start:` directive".into()))?;
        if sx >= width || sy >= height {
            return Err(EnvError::Invalid("start cell out of bounds".into()));
        }
        let start = sy * width + sx;
        if cells[start] == Cell::Wall {
            return Err(EnvError::Invalid("start cell is a wall".into()));
        }
        let mut blocked = HashSet::new();
        for (x, y, dir) in oneways {
            if x >= width || y >= height {
                return Err(EnvError::Invalid(format!(
                    "oneway cell {x},{y} out of bounds"
                )));
            }
            let from = y * width + x;
            let (dx, dy) = dir.offset();
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx as usize >= width || ny as usize >= height {
                return Err(EnvError::Invalid(format!(
                    "oneway door at {x},{y} points off the grid"
                )));
            }
            let to = ny as usize * width + nx as usize;
            if cells[from] == Cell::Wall || cells[to] == Cell::Wall {
                return Err(EnvError::Invalid(format!(
                    "oneway door at {x},{y} touches a wall"
                )));
            }
            // Block the reverse crossing of this edge.
            let reverse = match dir {
                Action::North => Action::South,
                Action::South => Action::North,
                Action::East => Action::West,
                Action::West => Action::East,
            };
            blocked.insert((to, reverse.index()));
        }
        let mut relocate = HashMap::new();
        for (trigger, dist) in stochastic {
            let trigger_cells = char_cells.get(&trigger).ok_or_else(|| {
                EnvError::Invalid(format!("stochastic trigger `{trigger}` not on the grid"))
            })?;
            let sum: f64 = dist.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(EnvError::Invalid(format!(
                    "stochastic rule for `{trigger}` sums to {sum}"
                )));
            }
            let mut resolved = Vec::new();
            for (c, p) in dist {
                let cells = char_cells.get(&c).ok_or_else(|| {
                    EnvError::Invalid(format!("stochastic target `{c}` not on the grid"))
                })?;
                if cells.len() != 1 {
                    return Err(EnvError::Invalid(format!(
                        "stochastic target `{c}` must name a unique cell"
                    )));
                }
                resolved.push((cells[0], p));
            }
            for &tc in trigger_cells {
                relocate.insert(tc, resolved.clone());
            }
        }
        Ok(Gridworld {
            width,
            height,
            cells,
            alphabet,
            label_bits,
            start,
            sink,
            blocked,
            relocate,
        })
    }
}
