//! The warehouse grid and the forklift skills acting on it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::Mutex;
use stormkit_core::deliberate::Heading;
use stormkit_core::kernel::BaseObject;
use stormkit_core::{CoreError, Result};
use stormkit_logic::Term;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Empty,
    Wall,
    Box(i64),
    /// A shelf slot and the box it holds, if any.
    Shelf(i64, Option<i64>),
    Truck,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forklift {
    pub x: i64,
    pub y: i64,
    pub heading: Heading,
    pub carrying: Option<i64>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GridError {
    #[error("layout row {row} has width {found}, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("unknown cell {0:?} in layout")]
    UnknownCell(char),
    #[error("empty layout")]
    Empty,
    #[error("forklift {0} is out of bounds or not on an empty cell")]
    BadPlacement(String),
    #[error("duplicate forklift {0}")]
    Duplicate(String),
}

/// Box counts by where the boxes are.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoxCount {
    pub floor: usize,
    pub carried: usize,
    pub shelved: usize,
}

impl BoxCount {
    pub fn total(self) -> usize {
        self.floor + self.carried + self.shelved
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridWorld {
    pub width: i64,
    pub height: i64,
    cells: Vec<Cell>,
    pub forklifts: BTreeMap<String, Forklift>,
    pub initial_boxes: usize,
}

impl GridWorld {
    /// Parses rows of `.` (empty), `#` (wall), `B` (box), `S` (shelf) and `T`
    /// (truck). Boxes and shelves are numbered from 1 in reading order.
    pub fn from_layout<S: AsRef<str>>(rows: &[S]) -> std::result::Result<GridWorld, GridError> {
        let width = rows.first().map(|r| r.as_ref().chars().count()).ok_or(GridError::Empty)?;
        if width == 0 {
            return Err(GridError::Empty);
        }
        let (mut cells, mut boxes, mut shelves) = (Vec::new(), 0, 0);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let found = row.chars().count();
            if found != width {
                return Err(GridError::Ragged { row: i, found, expected: width });
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => Cell::Empty,
                    '#' => Cell::Wall,
                    'T' => Cell::Truck,
                    'B' => {
                        boxes += 1;
                        Cell::Box(boxes)
                    }
                    'S' => {
                        shelves += 1;
                        Cell::Shelf(shelves, None)
                    }
                    other => return Err(GridError::UnknownCell(other)),
                });
            }
        }
        Ok(GridWorld { width: width as i64, height: rows.len() as i64, cells, forklifts: BTreeMap::new(), initial_boxes: boxes as usize })
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    pub fn cell(&self, x: i64, y: i64) -> Option<Cell> {
        self.in_bounds(x, y).then(|| self.cells[(y * self.width + x) as usize])
    }

    fn set(&mut self, x: i64, y: i64, c: Cell) {
        let w = self.width;
        self.cells[(y * w + x) as usize] = c;
    }

    pub fn place(&mut self, name: &str, x: i64, y: i64, heading: Heading) -> std::result::Result<(), GridError> {
        if self.forklifts.contains_key(name) {
            return Err(GridError::Duplicate(name.to_string()));
        }
        if self.cell(x, y) != Some(Cell::Empty) || self.occupant(x, y).is_some() {
            return Err(GridError::BadPlacement(name.to_string()));
        }
        self.forklifts.insert(name.to_string(), Forklift { x, y, heading, carrying: None });
        Ok(())
    }

    pub fn occupant(&self, x: i64, y: i64) -> Option<&str> {
        self.forklifts.iter().find(|(_, f)| f.x == x && f.y == y).map(|(n, _)| n.as_str())
    }

    pub fn count(&self) -> BoxCount {
        let mut c = BoxCount::default();
        for cell in &self.cells {
            match cell {
                Cell::Box(_) => c.floor += 1,
                Cell::Shelf(_, Some(_)) => c.shelved += 1,
                _ => {}
            }
        }
        c.carried = self.forklifts.values().filter(|f| f.carrying.is_some()).count();
        c
    }

    fn forklift(&self, name: &str) -> Result<&Forklift> {
        self.forklifts.get(name).ok_or_else(|| CoreError::failed(&format!("no forklift {name}")))
    }

    fn forklift_mut(&mut self, name: &str) -> Result<&mut Forklift> {
        self.forklifts.get_mut(name).ok_or_else(|| CoreError::failed(&format!("no forklift {name}")))
    }

    /// The cell in front of a forklift.
    pub fn front(&self, name: &str) -> Result<(i64, i64)> {
        let f = self.forklift(name)?;
        let (dx, dy) = f.heading.delta();
        Ok((f.x + dx, f.y + dy))
    }

    pub fn advance(&mut self, name: &str) -> Result<()> {
        let (x, y) = self.front(name)?;
        if self.cell(x, y) != Some(Cell::Empty) || self.occupant(x, y).is_some() {
            return Err(CoreError::failed("blocked"));
        }
        let f = self.forklift_mut(name)?;
        f.x = x;
        f.y = y;
        Ok(())
    }

    pub fn turn(&mut self, name: &str, h: Heading) -> Result<()> {
        self.forklift_mut(name)?.heading = h;
        Ok(())
    }

    pub fn grasp(&mut self, name: &str) -> Result<i64> {
        let (x, y) = self.front(name)?;
        if self.forklift(name)?.carrying.is_some() {
            return Err(CoreError::failed("already carrying"));
        }
        let Some(Cell::Box(b)) = self.cell(x, y) else { return Err(CoreError::failed("no box in front")) };
        self.set(x, y, Cell::Empty);
        self.forklift_mut(name)?.carrying = Some(b);
        Ok(b)
    }

    pub fn put(&mut self, name: &str) -> Result<i64> {
        let (x, y) = self.front(name)?;
        let Some(b) = self.forklift(name)?.carrying else { return Err(CoreError::failed("not carrying")) };
        let Some(Cell::Shelf(s, None)) = self.cell(x, y) else { return Err(CoreError::failed("no free shelf in front")) };
        self.set(x, y, Cell::Shelf(s, Some(b)));
        self.forklift_mut(name)?.carrying = None;
        Ok(s)
    }

    /// What a forklift sees: its own pose, the grid size, fixed obstacles,
    /// boxes and shelves on the floor, and the other forklifts.
    pub fn percepts(&self, name: &str) -> Result<Vec<Term>> {
        let me = self.forklift(name)?;
        let xy = |f: &str, x: i64, y: i64| Term::compound(f, vec![Term::int(x), Term::int(y)]);
        let loc = |kind: Term, x: i64, y: i64| Term::compound("location", vec![kind, Term::int(x), Term::int(y)]);
        let mut out =
            vec![xy("at", me.x, me.y), Term::compound("heading", vec![me.heading.to_term()]), xy("grid", self.width, self.height)];
        for y in 0..self.height {
            for x in 0..self.width {
                match self.cell(x, y).expect("in bounds") {
                    Cell::Empty => {}
                    Cell::Wall => out.push(xy("wall", x, y)),
                    Cell::Truck => out.push(xy("truck", x, y)),
                    Cell::Box(b) => out.push(loc(Term::compound("box", vec![Term::int(b)]), x, y)),
                    Cell::Shelf(s, held) => {
                        out.push(loc(Term::compound("shelf", vec![Term::int(s)]), x, y));
                        if let Some(b) = held {
                            out.push(Term::compound("stored", vec![Term::int(s), Term::int(b)]));
                        }
                    }
                }
            }
        }
        for (other, f) in self.forklifts.iter().filter(|(n, _)| n.as_str() != name) {
            out.push(loc(Term::compound("forklift", vec![Term::atom(other.as_str())]), f.x, f.y));
        }
        Ok(out)
    }
}

impl fmt::Display for GridWorld {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let ch = match (self.occupant(x, y), self.cell(x, y).expect("in bounds")) {
                    (Some(_), _) => 'F',
                    (None, Cell::Empty) => '.',
                    (None, Cell::Wall) => '#',
                    (None, Cell::Truck) => 'T',
                    (None, Cell::Box(_)) => 'B',
                    (None, Cell::Shelf(_, None)) => 'S',
                    (None, Cell::Shelf(_, Some(_))) => '$',
                };
                write!(f, "{ch}")?;
            }
            if y + 1 < self.height {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

pub type SharedWorld = Arc<Mutex<GridWorld>>;

fn heading_arg(t: &Term) -> Result<Heading> {
    t.as_atom().and_then(Heading::parse).ok_or_else(|| CoreError::failed(&format!("{t} is not a heading")))
}

/// The base object of forklift `name`: skills that act on the shared grid
/// and nothing else.
pub fn forklift_skills(world: &SharedWorld, name: &str) -> BaseObject {
    let w = |world: &SharedWorld| Arc::clone(world);
    let n = name.to_string();
    let mut b = BaseObject::new(name, "forklift");
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("advance", 0, move |_| wd.lock().advance(&nm).map(|_| Term::void()));
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("turnLeft", 0, move |_| {
        let mut g = wd.lock();
        let h = g.forklift(&nm)?.heading.left();
        g.turn(&nm, h).map(|_| h.to_term())
    });
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("turnRight", 0, move |_| {
        let mut g = wd.lock();
        let h = g.forklift(&nm)?.heading.right();
        g.turn(&nm, h).map(|_| h.to_term())
    });
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("turn", 1, move |a| {
        let h = heading_arg(&a[0])?;
        wd.lock().turn(&nm, h).map(|_| h.to_term())
    });
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("graspBox", 0, move |_| wd.lock().grasp(&nm).map(Term::int));
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("putBox", 0, move |_| wd.lock().put(&nm).map(Term::int));
    let (wd, nm) = (w(world), n.clone());
    b.add_skill("perceive", 0, move |_| wd.lock().percepts(&nm).map(Term::list));
    let (wd, nm) = (w(world), n);
    b.add_skill("nextLocation", 0, move |_| {
        let (x, y) = wd.lock().front(&nm)?;
        Ok(Term::compound("point", vec![Term::int(x), Term::int(y)]))
    });
    b
}
