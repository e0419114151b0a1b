//! Manhattan-grid geometry, vehicle placement, mobility and LOS tests.
//!
//! The grid is periodic: roads are centred on multiples of the block period
//! `P = building_breadth + road_width` and the world wraps toroidally at the
//! bounds, so the road on `x = 0` is the same road as the one on `x = L`.
//! Every distance and LOS test uses the minimum-image convention.

use std::collections::VecDeque;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are treated as "already at" an event point.
const EVENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn translate(&self, d: Point) -> Rect {
        Rect::new(self.min + d, self.max + d)
    }

    /// Strict interior test.
    pub fn contains_interior(&self, p: Point) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn overlaps_interior(&self, o: &Rect) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    /// True iff the segment `a -> b` passes through the open interior.
    ///
    /// Liang-Barsky clip against the closed rectangle, then require the
    /// clipped piece to have positive length and a midpoint strictly inside.
    /// Grazing an edge or touching a corner does not count as obstruction.
    pub fn segment_hits_interior(&self, a: Point, b: Point) -> bool {
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let checks = [
            (-d.x, a.x - self.min.x),
            (d.x, self.max.x - a.x),
            (-d.y, a.y - self.min.y),
            (d.y, self.max.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        if t1 - t0 <= 1e-12 {
            return false;
        }
        let mid = a + d * (0.5 * (t0 + t1));
        self.contains_interior(mid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    pub fn unit(self) -> Point {
        match self {
            Heading::East => Point::new(1.0, 0.0),
            Heading::North => Point::new(0.0, 1.0),
            Heading::West => Point::new(-1.0, 0.0),
            Heading::South => Point::new(0.0, -1.0),
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Heading::East | Heading::West => Axis::X,
            Heading::North | Heading::South => Axis::Y,
        }
    }

    /// +1 when travelling towards increasing coordinate along `axis()`.
    pub fn sign(self) -> f64 {
        match self {
            Heading::East | Heading::North => 1.0,
            Heading::West | Heading::South => -1.0,
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
            Heading::North => Heading::East,
        }
    }

    /// Sign of the right-hand side, measured along the perpendicular axis.
    fn right_hand(self) -> f64 {
        match self {
            Heading::North | Heading::West => 1.0,
            Heading::South | Heading::East => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    Straight,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnProbabilities {
    pub straight: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for TurnProbabilities {
    fn default() -> Self {
        TurnProbabilities {
            straight: 0.5,
            left: 0.25,
            right: 0.25,
        }
    }
}

impl TurnProbabilities {
    pub fn validate(&self) -> Result<()> {
        let all = [self.straight, self.left, self.right];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "turn-probabilities",
                "straight/left/right must be in [0,1] and sum to 1",
            ));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Turn {
        let u: f64 = rng.gen();
        if u < self.straight {
            Turn::Straight
        } else if u < self.straight + self.left {
            Turn::Left
        } else {
            Turn::Right
        }
    }
}

/// One directed lane. Lanes span the whole periodic axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub heading: Heading,
    /// Index of the road this lane belongs to, counted along the perpendicular axis.
    pub road: usize,
    /// 0 is the innermost lane next to the road centre line.
    pub slot: usize,
    /// Fixed perpendicular coordinate, wrapped into the bounds.
    pub coord: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub building_breadth: f64,
    pub lanes_per_road: usize,
    pub lane_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            blocks_x: 2,
            blocks_y: 2,
            building_breadth: 100.0,
            lanes_per_road: 2,
            lane_width: 3.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridLayout {
    pub building_breadth: f64,
    pub lane_width: f64,
    pub lanes_per_road: usize,
    pub road_width: f64,
    pub period: f64,
    pub buildings: Vec<Rect>,
    pub lanes: Vec<Lane>,
    pub bounds: Rect,
    blocks_x: usize,
    blocks_y: usize,
}

/// Lays out `blocks_x * blocks_y` square buildings separated by roads of
/// `lanes_per_road` lanes. Road centre lines sit on the bounds' edges and on
/// every multiple of the block period, so each building is surrounded by
/// (half-)roads and the grid tiles seamlessly under wrap-around.
pub fn build_manhattan_grid(cfg: &GridConfig) -> Result<GridLayout> {
    if !(cfg.building_breadth > 0.0) || !cfg.building_breadth.is_finite() {
        return Err(Error::config("building-breadth", "must be a positive length"));
    }
    if !(cfg.lane_width > 0.0) || !cfg.lane_width.is_finite() {
        return Err(Error::config("lane-width", "must be a positive length"));
    }
    if cfg.lanes_per_road < 2 {
        return Err(Error::config("lanes-per-road", "need at least 2 lanes per road"));
    }
    if cfg.blocks_x == 0 || cfg.blocks_y == 0 {
        return Err(Error::config("blocks", "need at least one block per axis"));
    }

    let road_width = cfg.lanes_per_road as f64 * cfg.lane_width;
    let period = cfg.building_breadth + road_width;
    let bounds = Rect::new(
        Point::new(0.0, 0.0),
        Point::new(cfg.blocks_x as f64 * period, cfg.blocks_y as f64 * period),
    );

    let mut buildings = Vec::with_capacity(cfg.blocks_x * cfg.blocks_y);
    for j in 0..cfg.blocks_y {
        for i in 0..cfg.blocks_x {
            let min = Point::new(
                i as f64 * period + road_width / 2.0,
                j as f64 * period + road_width / 2.0,
            );
            buildings.push(Rect::new(
                min,
                min + Point::new(cfg.building_breadth, cfg.building_breadth),
            ));
        }
    }

    let mut grid = GridLayout {
        building_breadth: cfg.building_breadth,
        lane_width: cfg.lane_width,
        lanes_per_road: cfg.lanes_per_road,
        road_width,
        period,
        buildings,
        lanes: Vec::new(),
        bounds,
        blocks_x: cfg.blocks_x,
        blocks_y: cfg.blocks_y,
    };

    let forward = cfg.lanes_per_road.div_ceil(2);
    let backward = cfg.lanes_per_road / 2;
    let mut lanes = Vec::new();
    for (heading, roads) in [
        (Heading::North, cfg.blocks_x),
        (Heading::South, cfg.blocks_x),
        (Heading::East, cfg.blocks_y),
        (Heading::West, cfg.blocks_y),
    ] {
        let per_dir = if heading.sign() > 0.0 { forward } else { backward };
        for road in 0..roads {
            for slot in 0..per_dir {
                let coord = grid.lane_coord(heading, road, slot);
                lanes.push(Lane {
                    heading,
                    road,
                    slot,
                    coord,
                });
            }
        }
    }
    grid.lanes = lanes;
    Ok(grid)
}

impl GridLayout {
    pub fn width(&self) -> f64 {
        self.bounds.width()
    }

    pub fn height(&self) -> f64 {
        self.bounds.height()
    }

    fn axis_len(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.width(),
            Axis::Y => self.height(),
        }
    }

    /// Road centre lines crossed while travelling along `axis`.
    fn crossing_roads(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.blocks_x,
            Axis::Y => self.blocks_y,
        }
    }

    fn lane_coord(&self, heading: Heading, road: usize, slot: usize) -> f64 {
        let centre = road as f64 * self.period;
        let offset = heading.right_hand() * (slot as f64 + 0.5) * self.lane_width;
        let perp_len = match heading.axis() {
            Axis::X => self.height(),
            Axis::Y => self.width(),
        };
        (centre + offset).rem_euclid(perp_len)
    }

    pub fn lane_index(&self, heading: Heading, road: usize, slot: usize) -> Option<usize> {
        self.lanes
            .iter()
            .position(|l| l.heading == heading && l.road == road && l.slot == slot)
    }

    pub fn wrap(&self, p: Point) -> Point {
        Point::new(p.x.rem_euclid(self.width()), p.y.rem_euclid(self.height()))
    }

    /// Displacement `b - a` reduced to the nearest periodic image.
    pub fn min_image_delta(&self, a: Point, b: Point) -> Point {
        let (w, h) = (self.width(), self.height());
        let mut d = b - a;
        d.x -= w * (d.x / w).round();
        d.y -= h * (d.y / h).round();
        d
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.min_image_delta(a, b).norm()
    }

    /// Building rectangles, including one ring of periodic images.
    fn building_images(&self) -> impl Iterator<Item = Rect> + '_ {
        let (w, h) = (self.width(), self.height());
        self.buildings.iter().flat_map(move |b| {
            (-1..=1).flat_map(move |i| (-1..=1).map(move |j| b.translate(Point::new(i as f64 * w, j as f64 * h))))
        })
    }

    fn segment_clear(&self, a: Point, b: Point) -> bool {
        !self.building_images().any(|r| r.segment_hits_interior(a, b))
    }

    /// LOS along the shortest periodic segment from `a` to `b`.
    pub fn is_los(&self, a: Point, b: Point) -> bool {
        let b = a + self.min_image_delta(a, b);
        self.segment_clear(a, b)
    }

    /// Corner count of the cheapest street route between two points:
    /// 0 for LOS, 1 if an L-shaped route with two clear legs exists, 2 otherwise.
    pub fn corner_count(&self, a: Point, b: Point) -> u32 {
        let b = a + self.min_image_delta(a, b);
        if self.segment_clear(a, b) {
            return 0;
        }
        let via = [Point::new(a.x, b.y), Point::new(b.x, a.y)];
        if via
            .iter()
            .any(|&c| self.segment_clear(a, c) && self.segment_clear(c, b))
        {
            1
        } else {
            2
        }
    }

    /// Manhattan (street) length between two points under minimum image.
    pub fn route_length(&self, a: Point, b: Point) -> f64 {
        let d = self.min_image_delta(a, b);
        d.x.abs() + d.y.abs()
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }
}

/// Length/width presets for the four vehicle classes, in metres.
pub const VEHICLE_CLASSES: [(f64, f64); 4] = [(4.5, 1.8), (5.5, 2.0), (7.0, 2.3), (12.0, 2.5)];

/// 50 km/h.
pub const DEFAULT_SPEED: f64 = 50.0 / 3.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    pub position: Point,
    pub heading: Heading,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub lane: usize,
    /// Index of the co-moving vehicle in the same slice, if any.
    pub partner: Option<usize>,
    /// Turn decisions made by the partner for intersections this vehicle has not reached yet.
    pub pending_turns: VecDeque<Turn>,
    /// Road whose far-side lane this vehicle will turn left onto.
    pub pending_left: Option<usize>,
    /// Cumulative displacement, not wrapped; used for window-averaged positions.
    pub odometer: Point,
}

impl Vehicle {
    pub fn new(id: usize, position: Point, lane: usize, grid: &GridLayout, speed: f64) -> Self {
        let l = grid.lanes[lane];
        Vehicle {
            id,
            position,
            heading: l.heading,
            speed,
            length: VEHICLE_CLASSES[0].0,
            width: VEHICLE_CLASSES[0].1,
            lane,
            partner: None,
            pending_turns: VecDeque::new(),
            pending_left: None,
            odometer: position,
        }
    }

    fn along(&self) -> f64 {
        match self.heading.axis() {
            Axis::X => self.position.x,
            Axis::Y => self.position.y,
        }
    }

    /// Lateral distance from the lane line (0 when on-lane).
    pub fn lane_offset(&self, grid: &GridLayout) -> f64 {
        let lane = grid.lanes[self.lane];
        let (perp, len) = match lane.heading.axis() {
            Axis::X => (self.position.y, grid.height()),
            Axis::Y => (self.position.x, grid.width()),
        };
        let d = (perp - lane.coord).rem_euclid(len);
        d.min(len - d)
    }

    pub fn is_on_lane(&self, grid: &GridLayout) -> bool {
        self.speed >= 0.0
            && grid.lanes[self.lane].heading == self.heading
            && self.lane_offset(grid) < 1e-6
            && self.position.x >= 0.0
            && self.position.x < grid.width()
            && self.position.y >= 0.0
            && self.position.y < grid.height()
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Decide(usize),
    TurnLeft(usize),
}

/// Distance travelled along `heading` from `from` until coordinate `target`
/// is reached, strictly beyond the current position.
fn forward_distance(from: f64, target: f64, sign: f64, len: f64) -> f64 {
    let d = ((target - from) * sign).rem_euclid(len);
    if d <= EVENT_EPS {
        d + len
    } else {
        d
    }
}

fn next_event(v: &Vehicle, grid: &GridLayout) -> (f64, Event) {
    let axis = v.heading.axis();
    let sign = v.heading.sign();
    let len = grid.axis_len(axis);
    let half = 0.5 * grid.lane_width;
    let pos = v.along();

    if let Some(road) = v.pending_left {
        let centre = road as f64 * grid.period;
        let d = forward_distance(pos, centre + sign * half, sign, len);
        return (d, Event::TurnLeft(road));
    }

    (0..grid.crossing_roads(axis))
        .map(|road| {
            let centre = road as f64 * grid.period;
            (
                forward_distance(pos, centre - sign * half, sign, len),
                Event::Decide(road),
            )
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("grid has at least one crossing road")
}

fn advance(v: &mut Vehicle, grid: &GridLayout, dist: f64) {
    let step = v.heading.unit() * dist;
    v.position = grid.wrap(v.position + step);
    v.odometer = v.odometer + step;
}

fn turn_onto(v: &mut Vehicle, grid: &GridLayout, heading: Heading, road: usize) {
    let lane = grid
        .lane_index(heading, road, 0)
        .expect("every road carries a slot-0 lane in both directions");
    let coord = grid.lanes[lane].coord;
    // Snap the lateral coordinate exactly onto the new lane line.
    match heading.axis() {
        Axis::X => v.position.y = coord,
        Axis::Y => v.position.x = coord,
    }
    v.heading = heading;
    v.lane = lane;
}

/// Advances every vehicle by `speed * dt` along the road network.
///
/// At each intersection a vehicle either consumes a decision left for it by
/// its partner, or draws one and hands it to the partner, so the two ends of
/// a V-UE pair always take the same route.
pub fn step_mobility<R: Rng + ?Sized>(
    vehicles: &mut [Vehicle],
    grid: &GridLayout,
    dt: f64,
    turns: &TurnProbabilities,
    rng: &mut R,
) {
    if dt <= 0.0 {
        return;
    }
    for i in 0..vehicles.len() {
        let mut remaining = vehicles[i].speed * dt;
        while remaining > 0.0 {
            let (d, event) = next_event(&vehicles[i], grid);
            if d > remaining {
                advance(&mut vehicles[i], grid, remaining);
                break;
            }
            advance(&mut vehicles[i], grid, d);
            remaining -= d;

            match event {
                Event::TurnLeft(road) => {
                    let v = &mut vehicles[i];
                    v.pending_left = None;
                    let heading = v.heading.left();
                    turn_onto(v, grid, heading, road);
                }
                Event::Decide(road) => {
                    let decision = match vehicles[i].pending_turns.pop_front() {
                        Some(t) => t,
                        None => {
                            let t = turns.draw(rng);
                            if let Some(p) = vehicles[i].partner {
                                vehicles[p].pending_turns.push_back(t);
                            }
                            t
                        }
                    };
                    let v = &mut vehicles[i];
                    match decision {
                        Turn::Straight => {}
                        Turn::Right => {
                            let heading = v.heading.right();
                            turn_onto(v, grid, heading, road);
                        }
                        Turn::Left => v.pending_left = Some(road),
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VuePair {
    pub id: usize,
    /// Index of the transmitter in the fleet's vehicle list.
    pub tx: usize,
    /// Index of the receiver in the fleet's vehicle list.
    pub rx: usize,
    /// Packets per second.
    pub arrival_rate: f64,
    /// Mean packet size in bits.
    pub packet_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    pub speed: f64,
    pub min_pair_distance: f64,
    pub max_pair_distance: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            speed: DEFAULT_SPEED,
            min_pair_distance: 15.0,
            max_pair_distance: 20.0,
        }
    }
}

/// All vehicles plus the pair structure over them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fleet {
    pub vehicles: Vec<Vehicle>,
    pub pairs: Vec<VuePair>,
}

impl Fleet {
    pub fn tx_position(&self, k: usize) -> Point {
        self.vehicles[self.pairs[k].tx].position
    }

    pub fn rx_position(&self, k: usize) -> Point {
        self.vehicles[self.pairs[k].rx].position
    }
}

/// Places `count` co-moving pairs uniformly over the lanes. The receiver
/// leads and the transmitter follows at a distance drawn from
/// `[min_pair_distance, max_pair_distance]` on the same lane.
pub fn place_pairs<R: Rng + ?Sized>(
    grid: &GridLayout,
    count: usize,
    cfg: &PlacementConfig,
    packet_bits: f64,
    rng: &mut R,
) -> Result<Fleet> {
    if cfg.speed < 0.0 {
        return Err(Error::config("speed", "must be non-negative"));
    }
    if !(cfg.min_pair_distance > 0.0) || cfg.max_pair_distance < cfg.min_pair_distance {
        return Err(Error::config(
            "pair-distance",
            "need 0 < min_pair_distance <= max_pair_distance",
        ));
    }
    let mut vehicles = Vec::with_capacity(2 * count);
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let lane_idx = rng.gen_range(0..grid.lanes.len());
        let lane = grid.lanes[lane_idx];
        let axis = lane.heading.axis();
        let sign = lane.heading.sign();
        let len = grid.axis_len(axis);
        let s = rng.gen_range(0.0..len);
        let gap = if cfg.max_pair_distance > cfg.min_pair_distance {
            rng.gen_range(cfg.min_pair_distance..=cfg.max_pair_distance)
        } else {
            cfg.min_pair_distance
        };
        let at = |along: f64| match axis {
            Axis::X => Point::new(along.rem_euclid(len), lane.coord),
            Axis::Y => Point::new(lane.coord, along.rem_euclid(len)),
        };
        let rx_pos = at(s);
        let tx_pos = at(s - sign * gap);

        let (tx_id, rx_id) = (2 * k, 2 * k + 1);
        let mut tx = Vehicle::new(tx_id, tx_pos, lane_idx, grid, cfg.speed);
        let mut rx = Vehicle::new(rx_id, rx_pos, lane_idx, grid, cfg.speed);
        for v in [&mut tx, &mut rx] {
            let (l, w) = VEHICLE_CLASSES[rng.gen_range(0..VEHICLE_CLASSES.len())];
            v.length = l;
            v.width = w;
        }
        tx.partner = Some(rx_id);
        rx.partner = Some(tx_id);

        // The leader is assumed to have gone straight through any
        // intersection lying between the two vehicles.
        let half = 0.5 * grid.lane_width;
        let tx_along = s - sign * gap;
        for road in 0..grid.crossing_roads(axis) {
            let target = road as f64 * grid.period - sign * half;
            let d = ((target - tx_along) * sign).rem_euclid(len);
            if d > EVENT_EPS && d <= gap {
                tx.pending_turns.push_back(Turn::Straight);
            }
        }

        vehicles.push(tx);
        vehicles.push(rx);
        pairs.push(VuePair {
            id: k,
            tx: tx_id,
            rx: rx_id,
            arrival_rate: 0.0,
            packet_bits,
        });
    }
    Ok(Fleet { vehicles, pairs })
}
