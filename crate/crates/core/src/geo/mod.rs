//! Cells, base-station sites, geodesic distance and the local planar
//! projection used for tessellation and center-of-mass computations.

mod voronoi;

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use voronoi::{build_voronoi, Location, Tessellation};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance by the haversine formula.
pub fn distance_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection around an origin, in kilometres.
///
/// The mapping is affine in (lat, lon), so straight edges and convexity are
/// preserved in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    origin: LatLon,
    kx: f64,
    ky: f64,
}

impl LocalProjection {
    pub fn new(origin: LatLon) -> Self {
        let ky = EARTH_RADIUS_KM.to_radians();
        Self {
            origin,
            kx: ky * origin.lat.to_radians().cos(),
            ky,
        }
    }

    /// Centered on the mean latitude/longitude of `points`.
    pub fn centered_on<'a>(points: impl IntoIterator<Item = &'a LatLon>) -> Self {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            lat += p.lat;
            lon += p.lon;
            n += 1;
        }
        let n = n.max(1) as f64;
        Self::new(LatLon::new(lat / n, lon / n))
    }

    pub fn origin(&self) -> LatLon {
        self.origin
    }

    #[inline]
    pub fn project(&self, p: LatLon) -> [f64; 2] {
        [(p.lon - self.origin.lon) * self.kx, (p.lat - self.origin.lat) * self.ky]
    }

    #[inline]
    pub fn unproject(&self, xy: [f64; 2]) -> LatLon {
        LatLon::new(self.origin.lat + xy[1] / self.ky, self.origin.lon + xy[0] / self.kx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    /// Tight box around `points` padded by `pad_km` on every side.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a LatLon>, pad_km: f64) -> Option<Self> {
        let mut it = points.into_iter().peekable();
        it.peek()?;
        let mut b = BoundingBox {
            min_lat: f64::INFINITY,
            min_lon: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            max_lon: f64::NEG_INFINITY,
        };
        for p in it {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        let dlat = (pad_km / EARTH_RADIUS_KM).to_degrees();
        let mid = ((b.min_lat + b.max_lat) / 2.0).to_radians();
        let dlon = dlat / mid.cos().max(1e-6);
        b.min_lat -= dlat;
        b.max_lat += dlat;
        b.min_lon -= dlon;
        b.max_lon += dlon;
        Some(b)
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn strictly_contains(&self, p: LatLon) -> bool {
        p.lat > self.min_lat && p.lat < self.max_lat && p.lon > self.min_lon && p.lon < self.max_lon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub cell_id: String,
    pub centroid: LatLon,
    pub base_station: LatLon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteGeometry {
    /// Lexicographically smallest member cell id.
    pub site_id: String,
    pub location: LatLon,
    /// Sorted, non-empty.
    pub member_cells: Vec<String>,
    /// Open ring (first vertex not repeated), counter-clockwise. Empty until
    /// the tessellation is built.
    pub polygon: Vec<LatLon>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Groups cells by base station. Two stations closer than `tolerance_m`
/// (transitively) form one site; with a zero tolerance only identical
/// coordinates merge. The site takes the station of its smallest cell id.
pub fn merge_cells_to_sites(cells: &[CellInfo], tolerance_m: f64) -> Result<Vec<SiteGeometry>> {
    if cells.is_empty() {
        return Err(Error::invalid("no cells to merge"));
    }
    if let Some(bad) = cells
        .iter()
        .find(|c| !c.base_station.is_valid() || !c.centroid.is_valid() || c.cell_id.is_empty())
    {
        return Err(Error::invalid(format!("cell `{}` has invalid coordinates or id", bad.cell_id)));
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|a, b| cells[*a].cell_id.cmp(&cells[*b].cell_id));
    if let Some(w) = order.windows(2).find(|w| cells[w[0]].cell_id == cells[w[1]].cell_id) {
        return Err(Error::invalid(format!("duplicate cell id `{}`", cells[w[0]].cell_id)));
    }
    let sorted: Vec<&CellInfo> = order.iter().map(|i| &cells[*i]).collect();
    let mut uf = UnionFind::new(sorted.len());

    if tolerance_m <= 0.0 {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, c) in sorted.iter().enumerate() {
            let key = (c.base_station.lat.to_bits(), c.base_station.lon.to_bits());
            match seen.get(&key) {
                Some(&j) => uf.union(i, j),
                None => {
                    seen.insert(key, i);
                }
            }
        }
    } else {
        let tol_km = tolerance_m / 1000.0;
        let proj = LocalProjection::centered_on(sorted.iter().map(|c| &c.base_station));
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        // Oversized grid cells absorb the projection's scale error away from the origin.
        let cell_km = 1.5 * tol_km;
        let key = |xy: [f64; 2]| ((xy[0] / cell_km).floor() as i64, (xy[1] / cell_km).floor() as i64);
        for (i, c) in sorted.iter().enumerate() {
            grid.entry(key(proj.project(c.base_station))).or_default().push(i);
        }
        for (i, c) in sorted.iter().enumerate() {
            let (gx, gy) = key(proj.project(c.base_station));
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(bucket) = grid.get(&(gx + dx, gy + dy)) {
                        for &j in bucket {
                            if j > i && distance_km(c.base_station, sorted[j].base_station) <= tol_km {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    // Roots are the smallest index in each component, i.e. the smallest id.
    let mut sites: Vec<SiteGeometry> = Vec::new();
    let mut site_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..sorted.len() {
        let root = uf.find(i);
        let idx = *site_of_root.entry(root).or_insert_with(|| {
            sites.push(SiteGeometry {
                site_id: sorted[root].cell_id.clone(),
                location: sorted[root].base_station,
                member_cells: Vec::new(),
                polygon: Vec::new(),
            });
            sites.len() - 1
        });
        sites[idx].member_cells.push(sorted[i].cell_id.clone());
    }
    sites.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    Ok(sites)
}

pub fn read_cells_csv<R: Read>(source: R) -> Result<Vec<CellInfo>> {
    #[derive(Deserialize)]
    struct Row {
        cell_id: String,
        centroid_lat: f64,
        centroid_lon: f64,
        station_lat: f64,
        station_lon: f64,
    }
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let r = row?;
        out.push(CellInfo {
            cell_id: r.cell_id,
            centroid: LatLon::new(r.centroid_lat, r.centroid_lon),
            base_station: LatLon::new(r.station_lat, r.station_lon),
        });
    }
    Ok(out)
}

pub fn write_cells_csv<W: Write>(cells: &[CellInfo], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_id", "centroid_lat", "centroid_lon", "station_lat", "station_lon"])?;
    for c in cells {
        w.write_record([
            c.cell_id.clone(),
            c.centroid.lat.to_string(),
            c.centroid.lon.to_string(),
            c.base_station.lat.to_string(),
            c.base_station.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
