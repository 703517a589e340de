//! Voronoi tessellation of site locations, clipped to a bounding box.
//!
//! Each cell is built by clipping the projected box against the bisector
//! half-planes of the other sites (Sutherland–Hodgman). Candidates are
//! visited nearest-first and clipping stops once no remaining site can reach
//! the current polygon, which keeps the build close to O(n log n) per cell
//! for evenly spread sites.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde_json::{json, Value};

use super::{BoundingBox, LatLon, LocalProjection, SiteGeometry};
use crate::error::{Error, Result};

type Point = [f64; 2];

/// Distance (km) within which a point counts as lying on a polygon edge.
const EDGE_EPS_KM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// Index into [`Tessellation::sites`].
    Site(usize),
    OutOfArea,
}

#[derive(Debug, Clone)]
struct GridIndex {
    origin: Point,
    cell: Point,
    dims: (usize, usize),
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(rect: [Point; 2], polygons: &[Vec<Point>]) -> Self {
        let side = (polygons.len() as f64).sqrt().ceil().max(1.0) as usize;
        let cell = [
            ((rect[1][0] - rect[0][0]) / side as f64).max(f64::MIN_POSITIVE),
            ((rect[1][1] - rect[0][1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut idx = GridIndex {
            origin: rect[0],
            cell,
            dims: (side, side),
            buckets: vec![Vec::new(); side * side],
        };
        for (i, poly) in polygons.iter().enumerate() {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in poly {
                for k in 0..2 {
                    lo[k] = lo[k].min(v[k] - EDGE_EPS_KM);
                    hi[k] = hi[k].max(v[k] + EDGE_EPS_KM);
                }
            }
            let (gx0, gy0) = idx.cell_of(lo);
            let (gx1, gy1) = idx.cell_of(hi);
            for gx in gx0..=gx1 {
                for gy in gy0..=gy1 {
                    idx.buckets[gy * side + gx].push(i as u32);
                }
            }
        }
        idx
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp((p[0] - self.origin[0]) / self.cell[0], self.dims.0),
            clamp((p[1] - self.origin[1]) / self.cell[1], self.dims.1),
        )
    }

    fn candidates(&self, p: Point) -> &[u32] {
        let (gx, gy) = self.cell_of(p);
        &self.buckets[gy * self.dims.0 + gx]
    }
}

/// Immutable site tessellation; safe to share across threads for queries.
#[derive(Debug, Clone)]
pub struct Tessellation {
    bbox: BoundingBox,
    projection: LocalProjection,
    sites: Vec<SiteGeometry>,
    seeds: Vec<Point>,
    planar: Vec<Vec<Point>>,
    rect: [Point; 2],
    cell_to_site: HashMap<String, usize>,
    index: GridIndex,
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// Keeps the part of `poly` with `n·p <= c`.
fn clip(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (dot(n, a) - c, dot(n, b) - c);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (f[0] - l[0]).abs() < 1e-12 && (f[1] - l[1]).abs() < 1e-12 {
            out.pop();
        }
    }
    out
}

fn polygon_area(poly: &[Point]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    a / 2.0
}

fn voronoi_cell(i: usize, seeds: &[Point], rect: [Point; 2]) -> Vec<Point> {
    let [lo, hi] = rect;
    let mut poly = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let si = seeds[i];
    let mut others: Vec<(f64, usize)> = seeds
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, s)| {
            let d = sub(*s, si);
            (dot(d, d), j)
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (d2, j) in others {
        let reach = poly
            .iter()
            .map(|v| {
                let d = sub(*v, si);
                dot(d, d)
            })
            .fold(0.0, f64::max);
        // A site farther than twice the polygon radius cannot cut it.
        if d2 > 4.0 * reach {
            break;
        }
        let sj = seeds[j];
        let n = sub(sj, si);
        let mid = [(si[0] + sj[0]) / 2.0, (si[1] + sj[1]) / 2.0];
        poly = clip(&poly, n, dot(n, mid));
    }
    poly
}

/// Builds the tessellation of `sites` within `bbox`.
///
/// Sites must lie strictly inside the box and no two may share a location.
pub fn build_voronoi(mut sites: Vec<SiteGeometry>, bbox: BoundingBox) -> Result<Tessellation> {
    if sites.is_empty() {
        return Err(Error::invalid("tessellation needs at least one site"));
    }
    sites.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    if let Some(s) = sites.iter().find(|s| !bbox.strictly_contains(s.location)) {
        return Err(Error::invalid(format!("site `{}` lies outside the bounding box", s.site_id)));
    }
    let projection = LocalProjection::centered_on(sites.iter().map(|s| &s.location));
    let seeds: Vec<Point> = sites.iter().map(|s| projection.project(s.location)).collect();
    {
        let mut order: Vec<usize> = (0..seeds.len()).collect();
        order.sort_by(|a, b| {
            seeds[*a][0]
                .total_cmp(&seeds[*b][0])
                .then(seeds[*a][1].total_cmp(&seeds[*b][1]))
        });
        if let Some(w) = order.windows(2).find(|w| seeds[w[0]] == seeds[w[1]]) {
            return Err(Error::invalid(format!(
                "sites `{}` and `{}` are co-located",
                sites[w[0]].site_id, sites[w[1]].site_id
            )));
        }
    }
    let rect = [
        projection.project(LatLon::new(bbox.min_lat, bbox.min_lon)),
        projection.project(LatLon::new(bbox.max_lat, bbox.max_lon)),
    ];
    let planar: Vec<Vec<Point>> = (0..seeds.len()).map(|i| voronoi_cell(i, &seeds, rect)).collect();
    for (site, poly) in sites.iter_mut().zip(&planar) {
        site.polygon = poly.iter().map(|p| projection.unproject(*p)).collect();
    }
    let mut cell_to_site = HashMap::new();
    for (i, s) in sites.iter().enumerate() {
        for c in &s.member_cells {
            if cell_to_site.insert(c.clone(), i).is_some() {
                return Err(Error::invalid(format!("cell `{c}` belongs to more than one site")));
            }
        }
    }
    let index = GridIndex::build(rect, &planar);
    Ok(Tessellation {
        bbox,
        projection,
        sites,
        seeds,
        planar,
        rect,
        cell_to_site,
        index,
    })
}

impl Tessellation {
    pub fn sites(&self) -> &[SiteGeometry] {
        &self.sites
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn projection(&self) -> &LocalProjection {
        &self.projection
    }

    pub fn site_index(&self, site_id: &str) -> Option<usize> {
        self.sites.binary_search_by(|s| s.site_id.as_str().cmp(site_id)).ok()
    }

    pub fn site_of_cell(&self, cell_id: &str) -> Option<usize> {
        self.cell_to_site.get(cell_id).copied()
    }

    /// Projected seed of site `i`, in km.
    pub fn seed(&self, i: usize) -> Point {
        self.seeds[i]
    }

    /// Projected polygon of site `i`, counter-clockwise, in km.
    pub fn planar_polygon(&self, i: usize) -> &[Point] {
        &self.planar[i]
    }

    pub fn area_km2(&self, i: usize) -> f64 {
        polygon_area(&self.planar[i])
    }

    pub fn box_area_km2(&self) -> f64 {
        (self.rect[1][0] - self.rect[0][0]) * (self.rect[1][1] - self.rect[0][1])
    }

    fn contains_planar(&self, i: usize, p: Point) -> bool {
        let poly = &self.planar[i];
        (0..poly.len()).all(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            let e = sub(b, a);
            let len = dot(e, e).sqrt();
            let cross = e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0]);
            len == 0.0 || cross >= -EDGE_EPS_KM * len
        })
    }

    /// Site whose polygon contains `p`. Points on a shared boundary resolve
    /// to the smaller site id.
    pub fn locate(&self, p: LatLon) -> Location {
        if !self.bbox.contains(p) {
            return Location::OutOfArea;
        }
        self.locate_planar(self.projection.project(p))
    }

    pub fn locate_planar(&self, xy: Point) -> Location {
        let cands = self.index.candidates(xy);
        if let Some(i) = cands.iter().map(|i| *i as usize).find(|i| self.contains_planar(*i, xy)) {
            return Location::Site(i);
        }
        // Only reachable through rounding on the box boundary.
        let nearest = (0..self.seeds.len()).min_by(|a, b| {
            let (da, db) = (sub(self.seeds[*a], xy), sub(self.seeds[*b], xy));
            dot(da, da).total_cmp(&dot(db, db))
        });
        nearest.map_or(Location::OutOfArea, Location::Site)
    }

    pub fn locate_id(&self, p: LatLon) -> Option<&str> {
        match self.locate(p) {
            Location::Site(i) => Some(&self.sites[i].site_id),
            Location::OutOfArea => None,
        }
    }

    /// One feature per site; the collection's `bbox` member carries the
    /// clipping box so the tessellation can be rebuilt exactly.
    pub fn write_geojson<W: Write>(&self, out: W) -> Result<()> {
        let features: Vec<Value> = self
            .sites
            .iter()
            .map(|s| {
                let mut ring: Vec<[f64; 2]> = s.polygon.iter().map(|p| [p.lon, p.lat]).collect();
                if let Some(first) = ring.first().copied() {
                    ring.push(first);
                }
                json!({
                    "type": "Feature",
                    "properties": {
                        "site_id": s.site_id,
                        "member_cells": s.member_cells,
                        "lat": s.location.lat,
                        "lon": s.location.lon,
                    },
                    "geometry": { "type": "Polygon", "coordinates": [ring] },
                })
            })
            .collect();
        let doc = json!({
            "type": "FeatureCollection",
            "bbox": [self.bbox.min_lon, self.bbox.min_lat, self.bbox.max_lon, self.bbox.max_lat],
            "features": features,
        });
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }

    /// Rebuilds a tessellation from a document written by [`Tessellation::write_geojson`].
    pub fn read_geojson<R: Read>(source: R) -> Result<Tessellation> {
        let doc: Value = serde_json::from_reader(source)?;
        let bad = |what: &str| Error::invalid(format!("sites.geojson: {what}"));
        let bb = doc["bbox"].as_array().ok_or_else(|| bad("missing bbox"))?;
        let num = |v: &Value| v.as_f64().ok_or_else(|| bad("non-numeric coordinate"));
        if bb.len() != 4 {
            return Err(bad("bbox must have four numbers"));
        }
        let bbox = BoundingBox {
            min_lon: num(&bb[0])?,
            min_lat: num(&bb[1])?,
            max_lon: num(&bb[2])?,
            max_lat: num(&bb[3])?,
        };
        let mut sites = Vec::new();
        for f in doc["features"].as_array().ok_or_else(|| bad("missing features"))? {
            let p = &f["properties"];
            let site_id = p["site_id"].as_str().ok_or_else(|| bad("missing site_id"))?;
            let member_cells = p["member_cells"]
                .as_array()
                .ok_or_else(|| bad("missing member_cells"))?
                .iter()
                .map(|c| c.as_str().map(str::to_owned).ok_or_else(|| bad("non-string cell id")))
                .collect::<Result<Vec<_>>>()?;
            sites.push(SiteGeometry {
                site_id: site_id.to_owned(),
                location: LatLon::new(num(&p["lat"])?, num(&p["lon"])?),
                member_cells,
                polygon: Vec::new(),
            });
        }
        build_voronoi(sites, bbox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(id: &str, lat: f64, lon: f64) -> SiteGeometry {
        SiteGeometry {
            site_id: id.into(),
            location: LatLon::new(lat, lon),
            member_cells: vec![id.into()],
            polygon: Vec::new(),
        }
    }

    fn bbox() -> BoundingBox {
        BoundingBox {
            min_lat: 47.3,
            min_lon: 18.9,
            max_lat: 47.7,
            max_lon: 19.3,
        }
    }

    #[test]
    fn single_site_gets_whole_box() {
        let t = build_voronoi(vec![site("a", 47.5, 19.1)], bbox()).unwrap();
        assert_eq!(t.planar_polygon(0).len(), 4);
        assert!((t.area_km2(0) - t.box_area_km2()).abs() < 1e-9 * t.box_area_km2());
    }

    #[test]
    fn symmetric_pair_splits_box_in_halves() {
        let t = build_voronoi(vec![site("a", 47.5, 19.0), site("b", 47.5, 19.2)], bbox()).unwrap();
        let half = t.box_area_km2() / 2.0;
        assert!((t.area_km2(0) - half).abs() < 1e-6 * half);
        assert!((t.area_km2(1) - half).abs() < 1e-6 * half);
        // Bisector at lon 19.1: midpoint tie goes to the smaller id.
        assert_eq!(t.locate_id(LatLon::new(47.5, 19.1)), Some("a"));
        assert_eq!(t.locate_id(LatLon::new(47.5, 19.1000001)), Some("b"));
    }

    #[test]
    fn own_location_and_out_of_area() {
        let t = build_voronoi(
            vec![site("a", 47.4, 19.0), site("b", 47.6, 19.2), site("c", 47.45, 19.25)],
            bbox(),
        )
        .unwrap();
        for (i, s) in t.sites().iter().enumerate() {
            assert_eq!(t.locate(s.location), Location::Site(i));
        }
        assert_eq!(t.locate(LatLon::new(48.0, 19.0)), Location::OutOfArea);
    }

    #[test]
    fn colocated_and_outside_sites_rejected() {
        assert!(build_voronoi(vec![site("a", 47.5, 19.0), site("b", 47.5, 19.0)], bbox()).is_err());
        assert!(build_voronoi(vec![site("a", 47.8, 19.0)], bbox()).is_err());
        assert!(build_voronoi(vec![], bbox()).is_err());
    }

    #[test]
    fn geojson_round_trip_rebuilds_same_polygons() {
        let t = build_voronoi(
            vec![site("a", 47.41, 19.02), site("b", 47.63, 19.21), site("c", 47.45, 19.25)],
            bbox(),
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_geojson(&mut buf).unwrap();
        let back = Tessellation::read_geojson(buf.as_slice()).unwrap();
        assert_eq!(back.sites(), t.sites());
    }
}
