//! Tile-grid model of the FPGA fabric: placement, damage and relocation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Resource demand of a hardware module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub name: String,
    pub luts: u32,
    pub ffs: u32,
}

impl Footprint {
    pub fn new(name: &str, luts: u32, ffs: u32) -> Self {
        Footprint { name: name.to_string(), luts, ffs }
    }
}

/// Named footprints, loadable from JSON (`{"name": {"luts": .., "ffs": ..}}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintLibrary(BTreeMap<String, Resources>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Resources {
    luts: u32,
    ffs: u32,
}

impl Default for FootprintLibrary {
    /// Published resource counts of the Rocket system modules.
    fn default() -> Self {
        let entries = [
            ("rocket_system", 15359, 6350),
            ("rocket_core", 3179, 1557),
            ("alu", 617, 125),
            ("nm_alu", 54, 8),
            ("mul", 563, 117),
            ("tdc_sensors", 64, 320),
        ];
        FootprintLibrary(entries.into_iter().map(|(n, luts, ffs)| (n.to_string(), Resources { luts, ffs })).collect())
    }
}

impl FootprintLibrary {
    pub fn get(&self, name: &str) -> Option<Footprint> {
        self.0.get(name).map(|r| Footprint::new(name, r.luts, r.ffs))
    }

    pub fn insert(&mut self, f: Footprint) {
        self.0.insert(f.name, Resources { luts: f.luts, ffs: f.ffs });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }
}

/// Axis-aligned rectangle in tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> u32 {
        self.w * self.h
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }

    pub fn tiles(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.y..self.y + self.h).flat_map(move |y| (self.x..self.x + self.w).map(move |x| (x, y)))
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}@{},{}", self.w, self.h, self.x, self.y)
    }
}

/// Parses `WxH@X,Y`.
impl FromStr for Rect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad rectangle `{s}` (expected WxH@X,Y)");
        let (size, pos) = s.split_once('@').ok_or_else(bad)?;
        let (w, h) = parse_dims(size).ok_or_else(bad)?;
        let (x, y) = pos.split_once(',').ok_or_else(bad)?;
        Ok(Rect { x: x.trim().parse().map_err(|_| bad())?, y: y.trim().parse().map_err(|_| bad())?, w, h })
    }
}

/// Parses `WxH`.
pub fn parse_dims(s: &str) -> Option<(u32, u32)> {
    let (w, h) = s.split_once('x')?;
    Some((w.trim().parse().ok()?, h.trim().parse().ok()?))
}

pub type PlacementId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub id: PlacementId,
    pub footprint: String,
    pub rect: Rect,
}

/// Tiles reconfigured by a relocation and the time it takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigCost {
    pub tiles: u32,
    pub time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FabricConfig {
    pub width: u32,
    pub height: u32,
    pub tile_luts: u32,
    pub tile_ffs: u32,
    pub reconfig_ns_per_tile: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig { width: 40, height: 60, tile_luts: 50, tile_ffs: 100, reconfig_ns_per_tile: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("grid dimensions and tile capacities must be positive")]
    BadConfig,
    #[error("no healthy free rectangle of {tiles} tiles for `{footprint}` ({free} healthy free tiles)")]
    NoFit { footprint: String, tiles: u32, free: u32 },
    #[error("rectangle {0} lies outside the grid")]
    OutOfBounds(Rect),
    #[error("no placement with id {0}")]
    UnknownPlacement(PlacementId),
}

/// The tile grid. Tiles are indexed row-major from (0, 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricGrid {
    cfg: FabricConfig,
    damaged: Vec<bool>,
    owner: Vec<Option<PlacementId>>,
    placements: BTreeMap<PlacementId, Placement>,
    next_id: PlacementId,
}

impl FabricGrid {
    pub fn new(cfg: FabricConfig) -> Result<Self, FabricError> {
        if cfg.width == 0 || cfg.height == 0 || cfg.tile_luts == 0 || cfg.tile_ffs == 0 {
            return Err(FabricError::BadConfig);
        }
        let n = (cfg.width * cfg.height) as usize;
        Ok(FabricGrid { cfg, damaged: vec![false; n], owner: vec![None; n], placements: BTreeMap::new(), next_id: 0 })
    }

    pub fn config(&self) -> &FabricConfig {
        &self.cfg
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        (y * self.cfg.width + x) as usize
    }

    pub fn is_damaged(&self, x: u32, y: u32) -> bool {
        self.damaged[self.idx(x, y)]
    }

    pub fn owner(&self, x: u32, y: u32) -> Option<PlacementId> {
        self.owner[self.idx(x, y)]
    }

    pub fn healthy_tiles(&self) -> u32 {
        self.damaged.iter().filter(|d| !**d).count() as u32
    }

    pub fn free_healthy_tiles(&self) -> u32 {
        self.damaged.iter().zip(&self.owner).filter(|(d, o)| !**d && o.is_none()).count() as u32
    }

    pub fn placement(&self, id: PlacementId) -> Option<&Placement> {
        self.placements.get(&id)
    }

    pub fn placements(&self) -> impl Iterator<Item = &Placement> {
        self.placements.values()
    }

    pub fn find(&self, footprint: &str) -> Option<&Placement> {
        self.placements.values().find(|p| p.footprint == footprint)
    }

    /// Tiles needed to cover `f`'s LUT and FF demand (at least one).
    pub fn tiles_needed(&self, f: &Footprint) -> u32 {
        f.luts.div_ceil(self.cfg.tile_luts).max(f.ffs.div_ceil(self.cfg.tile_ffs)).max(1)
    }

    pub fn overlaps_damage(&self, r: &Rect) -> bool {
        r.tiles().any(|(x, y)| self.is_damaged(x, y))
    }

    /// Smallest-area first fit: areas ascending from `tiles`, shapes of
    /// each area widest first, positions row-major. Tiles of `avoid` are
    /// treated as unusable.
    fn find_rect(&self, tiles: u32, avoid: Option<Rect>) -> Option<Rect> {
        let (w, h) = (self.cfg.width, self.cfg.height);
        let free = self.free_healthy_tiles();
        if tiles > free {
            return None;
        }
        // summed-area table of blocked tiles, (w+1) x (h+1)
        let stride = (w + 1) as usize;
        let mut sat = vec![0u32; stride * (h + 1) as usize];
        for y in 0..h {
            for x in 0..w {
                let i = self.idx(x, y);
                let avoided = avoid.is_some_and(|a| a.intersects(&Rect::new(x, y, 1, 1)));
                let blocked = (self.damaged[i] || self.owner[i].is_some() || avoided) as u32;
                let (xs, ys) = (x as usize + 1, y as usize + 1);
                sat[ys * stride + xs] =
                    blocked + sat[(ys - 1) * stride + xs] + sat[ys * stride + xs - 1] - sat[(ys - 1) * stride + xs - 1];
            }
        }
        let blocked_in = |r: Rect| {
            let (x0, y0, x1, y1) = (r.x as usize, r.y as usize, (r.x + r.w) as usize, (r.y + r.h) as usize);
            sat[y1 * stride + x1] + sat[y0 * stride + x0] - sat[y0 * stride + x1] - sat[y1 * stride + x0]
        };
        for area in tiles..=free {
            for rw in (1..=w.min(area)).rev() {
                if area % rw != 0 || area / rw > h {
                    continue;
                }
                let rh = area / rw;
                for y in 0..=h - rh {
                    for x in 0..=w - rw {
                        let r = Rect::new(x, y, rw, rh);
                        if blocked_in(r) == 0 {
                            return Some(r);
                        }
                    }
                }
            }
        }
        None
    }

    fn occupy(&mut self, p: &Placement) {
        for (x, y) in p.rect.tiles() {
            let i = self.idx(x, y);
            self.owner[i] = Some(p.id);
        }
    }

    fn vacate(&mut self, r: &Rect) {
        for (x, y) in r.tiles() {
            let i = self.idx(x, y);
            self.owner[i] = None;
        }
    }

    fn no_fit(&self, f: &Footprint) -> FabricError {
        FabricError::NoFit { footprint: f.name.clone(), tiles: self.tiles_needed(f), free: self.free_healthy_tiles() }
    }

    pub fn place(&mut self, f: &Footprint) -> Result<Placement, FabricError> {
        let rect = self.find_rect(self.tiles_needed(f), None).ok_or_else(|| self.no_fit(f))?;
        let p = Placement { id: self.next_id, footprint: f.name.clone(), rect };
        self.next_id += 1;
        self.occupy(&p);
        self.placements.insert(p.id, p.clone());
        Ok(p)
    }

    /// Marks `region` damaged and returns the placements it touches.
    /// Their tiles stay occupied until relocated.
    pub fn damage(&mut self, region: Rect) -> Result<Vec<PlacementId>, FabricError> {
        if region.x + region.w > self.cfg.width || region.y + region.h > self.cfg.height {
            return Err(FabricError::OutOfBounds(region));
        }
        for (x, y) in region.tiles() {
            let i = self.idx(x, y);
            self.damaged[i] = true;
        }
        Ok(self.placements.values().filter(|p| p.rect.intersects(&region)).map(|p| p.id).collect())
    }

    /// Re-implements placement `id` elsewhere: its old tiles are released
    /// and excluded from the search, and the footprint is placed by the same
    /// first-fit rule. On failure the grid is unchanged.
    pub fn relocate(&mut self, id: PlacementId, footprint: &Footprint) -> Result<(Placement, ReconfigCost), FabricError> {
        let old = self.placements.get(&id).cloned().ok_or(FabricError::UnknownPlacement(id))?;
        self.vacate(&old.rect);
        let Some(rect) = self.find_rect(self.tiles_needed(footprint), Some(old.rect)) else {
            let err = self.no_fit(footprint);
            self.occupy(&old);
            return Err(err);
        };
        let p = Placement { id, footprint: footprint.name.clone(), rect };
        self.occupy(&p);
        self.placements.insert(id, p.clone());
        let cost = ReconfigCost { tiles: rect.area(), time_ns: rect.area() as u64 * self.cfg.reconfig_ns_per_tile };
        Ok((p, cost))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: u32, h: u32) -> FabricGrid {
        FabricGrid::new(FabricConfig { width: w, height: h, ..FabricConfig::default() }).unwrap()
    }

    fn lib(name: &str) -> Footprint {
        FootprintLibrary::default().get(name).unwrap()
    }

    #[test]
    fn published_footprints() {
        let l = FootprintLibrary::default();
        assert_eq!(l.get("rocket_system"), Some(Footprint::new("rocket_system", 15359, 6350)));
        assert_eq!(l.get("rocket_core"), Some(Footprint::new("rocket_core", 3179, 1557)));
        assert_eq!(l.get("alu"), Some(Footprint::new("alu", 617, 125)));
        assert_eq!(l.get("tdc_sensors"), Some(Footprint::new("tdc_sensors", 64, 320)));
        let (nm, mul) = (l.get("nm_alu").unwrap(), l.get("mul").unwrap());
        assert_eq!((nm.luts + mul.luts, nm.ffs + mul.ffs), (617, 125));
        assert_eq!(FootprintLibrary::from_json(&l.to_json()).unwrap(), l);
    }

    #[test]
    fn tile_counts() {
        let g = grid(40, 60);
        assert_eq!(g.tiles_needed(&lib("alu")), 13);
        assert_eq!(g.tiles_needed(&lib("rocket_core")), 64);
        assert_eq!(g.tiles_needed(&lib("tdc_sensors")), 4);
        assert_eq!(g.tiles_needed(&Footprint::new("empty", 0, 0)), 1);
    }

    #[test]
    fn first_fit_shapes() {
        let mut g = grid(40, 60);
        assert_eq!(g.place(&lib("alu")).unwrap().rect, Rect::new(0, 0, 13, 1));
        assert_eq!(g.place(&lib("rocket_core")).unwrap().rect, Rect::new(0, 1, 32, 2));
        assert_eq!(g.place(&Footprint::new("empty", 0, 0)).unwrap().rect, Rect::new(13, 0, 1, 1));
    }

    #[test]
    fn fully_damaged_grid_has_no_fit() {
        let mut g = grid(4, 4);
        assert_eq!(g.damage(Rect::new(0, 0, 4, 4)).unwrap(), Vec::<PlacementId>::new());
        assert!(matches!(g.place(&Footprint::new("x", 1, 1)), Err(FabricError::NoFit { free: 0, .. })));
        assert!(matches!(g.damage(Rect::new(3, 3, 2, 1)), Err(FabricError::OutOfBounds(_))));
    }

    #[test]
    fn damage_reports_affected_and_is_idempotent() {
        let mut g = grid(40, 60);
        let core = g.place(&lib("rocket_core")).unwrap();
        assert_eq!(g.damage(Rect::new(0, 10, 5, 5)).unwrap(), Vec::<PlacementId>::new());
        assert_eq!(g.damage(Rect::new(3, 1, 2, 2)).unwrap(), vec![core.id]);
        let snapshot = g.clone();
        assert_eq!(g.damage(Rect::new(3, 1, 2, 2)).unwrap(), vec![core.id]);
        assert_eq!(g, snapshot);
        assert_eq!(g.owner(3, 1), Some(core.id));
    }

    #[test]
    fn relocation_avoids_damage() {
        let mut g = grid(40, 60);
        let core = g.place(&lib("rocket_core")).unwrap();
        let healthy = g.healthy_tiles();
        g.damage(core.rect).unwrap();
        assert_eq!(g.healthy_tiles(), healthy - 64);
        let (moved, cost) = g.relocate(core.id, &lib("rocket_core")).unwrap();
        assert_eq!(moved.id, core.id);
        assert!(!g.overlaps_damage(&moved.rect));
        assert_eq!(moved.rect, Rect::new(0, 2, 32, 2));
        assert_eq!(cost, ReconfigCost { tiles: 64, time_ns: 64_000 });
        assert_eq!(g.owner(0, 0), None);
    }

    #[test]
    fn relocation_without_spare_capacity_fails_cleanly() {
        let mut g = grid(32, 4);
        let core = g.place(&lib("rocket_core")).unwrap();
        g.place(&lib("tdc_sensors")).unwrap();
        g.damage(core.rect).unwrap();
        let before = g.clone();
        let err = g.relocate(core.id, &lib("rocket_core")).unwrap_err();
        assert_eq!(err, FabricError::NoFit { footprint: "rocket_core".into(), tiles: 64, free: 60 });
        assert_eq!(g, before);
        assert!(matches!(g.relocate(9, &lib("alu")), Err(FabricError::UnknownPlacement(9))));
    }

    #[test]
    fn rect_parsing() {
        assert_eq!("32x2@0,3".parse(), Ok(Rect::new(0, 3, 32, 2)));
        assert!("32x2".parse::<Rect>().is_err());
        assert_eq!(parse_dims("40x60"), Some((40, 60)));
    }
}
