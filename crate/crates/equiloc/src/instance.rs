//! Location instances: nodes, travel-time matrices, demand, and ingestion.
//!
//! An [`Instance`] is immutable after construction and safe to share across
//! solver workers. Travel times are always minutes. When no matrix is
//! supplied, a documented proxy is built from coordinates: haversine
//! kilometres times a circuity factor, divided by a driving speed. The
//! bundled Lehigh County dataset (21 nodes, 2010 census populations) ships
//! with the crate.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Mean Earth radius in kilometres for the haversine proxy.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Default driving speed for the proxy travel-time matrix.
pub const DEFAULT_SPEED_KMH: f64 = 60.0;

/// Default circuity factor (road distance over straight-line distance).
pub const DEFAULT_CIRCUITY: f64 = 1.3;

/// Default total service demand spread over the nodes.
pub const DEFAULT_TOTAL_DEMAND: f64 = 1000.0;

/// Default demand standard deviation as a fraction of the mean.
pub const DEFAULT_STD_FACTOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("nodes CSV must have header columns id,name,population[,lat,lon]; got {0}")]
    MissingColumns(String),
    #[error("duplicate node id {0}")]
    DuplicateId(usize),
    #[error("node ids must be contiguous from 0")]
    NonContiguousIds,
    #[error("no distance matrix supplied and node {0} has no coordinates to build one")]
    MissingDistanceSource(String),
    #[error("node {0} has no coordinates")]
    MissingCoordinates(String),
    #[error("distance matrix error: {0}")]
    BadMatrix(String),
    #[error("validation error: {0}")]
    Validation(String),
}

fn io_err(path: &Path, source: std::io::Error) -> InstanceError {
    InstanceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A demand node; every node is also a candidate facility site.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub name: String,
    pub population: u64,
    /// (latitude, longitude) in degrees.
    pub coords: Option<(f64, f64)>,
}

/// A validated location instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    nodes: Vec<Node>,
    distance: Vec<Vec<f64>>,
    demand_mean: Vec<f64>,
    demand_std: Vec<f64>,
    p: usize,
    fingerprint: String,
}

impl Instance {
    /// Build an instance from explicit parts, checking every invariant:
    /// contiguous ids, square non-negative matrix with a zero diagonal,
    /// non-negative demand vectors, and 1 <= p <= |I|.
    pub fn from_parts(
        nodes: Vec<Node>,
        distance: Vec<Vec<f64>>,
        demand_mean: Vec<f64>,
        demand_std: Vec<f64>,
        p: usize,
    ) -> Result<Self, InstanceError> {
        let n = nodes.len();
        if n == 0 {
            return Err(InstanceError::Validation(
                "instance needs at least one node".into(),
            ));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(InstanceError::NonContiguousIds);
            }
        }
        if distance.len() != n {
            return Err(InstanceError::BadMatrix(format!(
                "expected {n} rows, got {}",
                distance.len()
            )));
        }
        for (i, row) in distance.iter().enumerate() {
            if row.len() != n {
                return Err(InstanceError::BadMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(InstanceError::BadMatrix(format!(
                        "entry ({i},{j}) = {d} must be finite and non-negative"
                    )));
                }
            }
            if distance[i][i] != 0.0 {
                return Err(InstanceError::BadMatrix(format!(
                    "diagonal entry ({i},{i}) = {} must read 0",
                    distance[i][i]
                )));
            }
        }
        if demand_mean.len() != n || demand_std.len() != n {
            return Err(InstanceError::Validation(
                "demand vectors must match node count".into(),
            ));
        }
        for i in 0..n {
            if !demand_mean[i].is_finite() || demand_mean[i] < 0.0 {
                return Err(InstanceError::Validation(format!(
                    "demand mean at node {i} = {} must be finite and non-negative",
                    demand_mean[i]
                )));
            }
            if !demand_std[i].is_finite() || demand_std[i] < 0.0 {
                return Err(InstanceError::Validation(format!(
                    "demand std at node {i} = {} must be finite and non-negative",
                    demand_std[i]
                )));
            }
        }
        if p < 1 || p > n {
            return Err(InstanceError::Validation(format!(
                "p = {p} must be in 1..={n}"
            )));
        }
        let fingerprint = compute_fingerprint(&nodes, &distance, &demand_mean, &demand_std, p);
        Ok(Instance {
            nodes,
            distance,
            demand_mean,
            demand_std,
            p,
            fingerprint,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty instances
    }

    pub fn distance(&self) -> &[Vec<f64>] {
        &self.distance
    }

    pub fn demand_mean(&self) -> &[f64] {
        &self.demand_mean
    }

    pub fn demand_std(&self) -> &[f64] {
        &self.demand_std
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Content hash over nodes, matrix, demand, and p.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn total_population(&self) -> u64 {
        self.nodes.iter().map(|n| n.population).sum()
    }

    /// Same instance with a different facility count.
    pub fn with_p(&self, p: usize) -> Result<Self, InstanceError> {
        Instance::from_parts(
            self.nodes.clone(),
            self.distance.clone(),
            self.demand_mean.clone(),
            self.demand_std.clone(),
            p,
        )
    }

    /// The bundled Lehigh County instance: 21 nodes, proxy travel times,
    /// total demand 1000 with std factor 0.5, p = 1.
    pub fn lehigh() -> Self {
        let nodes = parse_nodes(LEHIGH_CSV.as_bytes()).expect("bundled lehigh.csv is valid");
        let distance =
            build_distance_matrix(&nodes, DEFAULT_SPEED_KMH, DEFAULT_CIRCUITY).expect("coords");
        let (mean, std) = derive_demand(&nodes, DEFAULT_TOTAL_DEMAND, DEFAULT_STD_FACTOR)
            .expect("positive population");
        Instance::from_parts(nodes, distance, mean, std, 1).expect("bundled data is consistent")
    }
}

const LEHIGH_CSV: &str = include_str!("../data/lehigh.csv");

fn compute_fingerprint(
    nodes: &[Node],
    distance: &[Vec<f64>],
    demand_mean: &[f64],
    demand_std: &[f64],
    p: usize,
) -> String {
    let mut h = Sha256::new();
    h.update(b"equiloc-instance-v1");
    h.update((nodes.len() as u64).to_le_bytes());
    for node in nodes {
        h.update((node.id as u64).to_le_bytes());
        h.update((node.name.len() as u64).to_le_bytes());
        h.update(node.name.as_bytes());
        h.update(node.population.to_le_bytes());
        match node.coords {
            Some((lat, lon)) => {
                h.update([1u8]);
                h.update(lat.to_bits().to_le_bytes());
                h.update(lon.to_bits().to_le_bytes());
            }
            None => h.update([0u8]),
        }
    }
    for row in distance {
        for &d in row {
            h.update(d.to_bits().to_le_bytes());
        }
    }
    for &m in demand_mean {
        h.update(m.to_bits().to_le_bytes());
    }
    for &s in demand_std {
        h.update(s.to_bits().to_le_bytes());
    }
    h.update((p as u64).to_le_bytes());
    hex_digest(&h.finalize())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Haversine great-circle distance in kilometres.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = a;
    let (lat2, lon2) = b;
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let s = (dlat / 2.0).sin().powi(2)
        + lat1.to_radians().cos() * lat2.to_radians().cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

/// Proxy travel-time matrix in minutes: haversine km x circuity / speed x 60.
/// The diagonal is exactly zero.
pub fn build_distance_matrix(
    nodes: &[Node],
    speed_kmh: f64,
    circuity: f64,
) -> Result<Vec<Vec<f64>>, InstanceError> {
    if speed_kmh <= 0.0 {
        return Err(InstanceError::Validation(format!(
            "speed {speed_kmh} must be positive"
        )));
    }
    if circuity < 1.0 {
        return Err(InstanceError::Validation(format!(
            "circuity {circuity} must be >= 1"
        )));
    }
    let coords: Vec<(f64, f64)> = nodes
        .iter()
        .map(|n| {
            n.coords
                .ok_or_else(|| InstanceError::MissingCoordinates(n.name.clone()))
        })
        .collect::<Result<_, _>>()?;
    let n = nodes.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix[i][j] = haversine_km(coords[i], coords[j]) * circuity / speed_kmh * 60.0;
            }
        }
    }
    Ok(matrix)
}

/// Demand means proportional to population share of `total_demand`, with
/// std = std_factor x mean. Means stay full precision; see
/// [`rounded_demand`] for the integer display view.
pub fn derive_demand(
    nodes: &[Node],
    total_demand: f64,
    std_factor: f64,
) -> Result<(Vec<f64>, Vec<f64>), InstanceError> {
    if total_demand <= 0.0 {
        return Err(InstanceError::Validation(format!(
            "total demand {total_demand} must be positive"
        )));
    }
    if std_factor < 0.0 {
        return Err(InstanceError::Validation(format!(
            "std factor {std_factor} must be non-negative"
        )));
    }
    let total_pop: u64 = nodes.iter().map(|n| n.population).sum();
    if total_pop == 0 {
        return Err(InstanceError::Validation("total population is zero".into()));
    }
    let mean: Vec<f64> = nodes
        .iter()
        .map(|n| n.population as f64 / total_pop as f64 * total_demand)
        .collect();
    let std: Vec<f64> = mean.iter().map(|&m| std_factor * m).collect();
    Ok((mean, std))
}

/// Nearest-integer view of demand means (display only; optimization uses the
/// full-precision means).
pub fn rounded_demand(means: &[f64]) -> Vec<u64> {
    means.iter().map(|&m| m.round() as u64).collect()
}

/// Options for CSV ingestion.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Companion distance-matrix CSV; when absent the proxy matrix is built
    /// from coordinates.
    pub distance_path: Option<std::path::PathBuf>,
    pub p: usize,
    pub total_demand: f64,
    pub std_factor: f64,
    pub speed_kmh: f64,
    pub circuity: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            distance_path: None,
            p: 1,
            total_demand: DEFAULT_TOTAL_DEMAND,
            std_factor: DEFAULT_STD_FACTOR,
            speed_kmh: DEFAULT_SPEED_KMH,
            circuity: DEFAULT_CIRCUITY,
        }
    }
}

fn parse_nodes<R: Read>(reader: R) -> Result<Vec<Node>, InstanceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_col, name_col, pop_col) = match (col("id"), col("name"), col("population")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(InstanceError::MissingColumns(headers.join(","))),
    };
    let lat_col = col("lat");
    let lon_col = col("lon");

    let mut nodes = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let id: usize = field(id_col).parse().map_err(|e| InstanceError::Parse {
            row,
            message: format!("bad id: {e}"),
        })?;
        if !seen.insert(id) {
            return Err(InstanceError::DuplicateId(id));
        }
        let population: u64 =
            field(pop_col)
                .replace(',', "")
                .parse()
                .map_err(|e| InstanceError::Parse {
                    row,
                    message: format!("bad population: {e}"),
                })?;
        let coords = match (lat_col, lon_col) {
            (Some(la), Some(lo)) => {
                let (ls, os) = (field(la), field(lo));
                if ls.is_empty() && os.is_empty() {
                    None
                } else {
                    let lat: f64 = ls.parse().map_err(|e| InstanceError::Parse {
                        row,
                        message: format!("bad lat: {e}"),
                    })?;
                    let lon: f64 = os.parse().map_err(|e| InstanceError::Parse {
                        row,
                        message: format!("bad lon: {e}"),
                    })?;
                    Some((lat, lon))
                }
            }
            _ => None,
        };
        nodes.push(Node {
            id,
            name: field(name_col).to_string(),
            population,
            coords,
        });
    }
    nodes.sort_by_key(|n| n.id);
    for (i, node) in nodes.iter().enumerate() {
        if node.id != i {
            return Err(InstanceError::NonContiguousIds);
        }
    }
    Ok(nodes)
}

/// Parse a distance-matrix CSV: plain square matrix of minutes, no header.
/// A leading `# units: seconds|minutes|hours` comment line converts other
/// units to minutes on ingestion.
pub fn parse_distance_csv(text: &str) -> Result<Vec<Vec<f64>>, InstanceError> {
    let mut scale = 1.0;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(units) = rest.strip_prefix("units:") {
                scale = match units.trim() {
                    "minutes" => 1.0,
                    "seconds" => 1.0 / 60.0,
                    "hours" => 60.0,
                    other => {
                        return Err(InstanceError::BadMatrix(format!(
                            "unknown units declaration '{other}'"
                        )))
                    }
                };
            }
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| InstanceError::Parse {
                        row: line_no + 1,
                        message: format!("bad matrix entry: {e}"),
                    })
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(InstanceError::BadMatrix("matrix file has no rows".into()));
    }
    if scale != 1.0 {
        for row in &mut rows {
            for d in row.iter_mut() {
                *d *= scale;
            }
        }
    }
    Ok(rows)
}

/// Load an instance. A file path is ingested as a nodes CSV
/// (`id,name,population[,lat,lon]`) using `opts`; a directory path reloads an
/// instance previously written by [`save_instance`] exactly.
pub fn load_instance(path: &Path, opts: &LoadOptions) -> Result<Instance, InstanceError> {
    if path.is_dir() {
        return load_instance_dir(path);
    }
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let nodes = parse_nodes(file)?;
    let distance = match &opts.distance_path {
        Some(dp) => {
            let text = std::fs::read_to_string(dp).map_err(|e| io_err(dp, e))?;
            parse_distance_csv(&text)?
        }
        None => {
            if nodes.iter().any(|n| n.coords.is_none()) {
                let missing = nodes
                    .iter()
                    .find(|n| n.coords.is_none())
                    .map(|n| n.name.clone())
                    .unwrap();
                return Err(InstanceError::MissingDistanceSource(missing));
            }
            build_distance_matrix(&nodes, opts.speed_kmh, opts.circuity)?
        }
    };
    let (mean, std) = derive_demand(&nodes, opts.total_demand, opts.std_factor)?;
    Instance::from_parts(nodes, distance, mean, std, opts.p)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct InstanceMeta {
    p: usize,
    demand_mean: Vec<f64>,
    demand_std: Vec<f64>,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write `nodes.csv`, `distance.csv`, and `instance.json` into `dir` so that
/// [`load_instance`] on the directory reproduces the instance exactly.
pub fn save_instance(instance: &Instance, dir: &Path) -> Result<(), InstanceError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let any_coords = instance.nodes.iter().any(|n| n.coords.is_some());
    let mut nodes_csv = String::new();
    nodes_csv.push_str(if any_coords {
        "id,name,population,lat,lon\n"
    } else {
        "id,name,population\n"
    });
    for node in &instance.nodes {
        if any_coords {
            let (lat, lon) = match node.coords {
                Some((la, lo)) => (la.to_string(), lo.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                nodes_csv,
                "{},{},{},{},{}",
                node.id,
                csv_field(&node.name),
                node.population,
                lat,
                lon
            );
        } else {
            let _ = writeln!(
                nodes_csv,
                "{},{},{}",
                node.id,
                csv_field(&node.name),
                node.population
            );
        }
    }
    let mut dist_csv = String::new();
    for row in &instance.distance {
        let cells: Vec<String> = row.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(dist_csv, "{}", cells.join(","));
    }
    let meta = InstanceMeta {
        p: instance.p,
        demand_mean: instance.demand_mean.clone(),
        demand_std: instance.demand_std.clone(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| InstanceError::Validation(format!("meta serialization: {e}")))?;
    std::fs::write(dir.join("nodes.csv"), nodes_csv).map_err(|e| io_err(dir, e))?;
    std::fs::write(dir.join("distance.csv"), dist_csv).map_err(|e| io_err(dir, e))?;
    std::fs::write(dir.join("instance.json"), meta_json).map_err(|e| io_err(dir, e))?;
    Ok(())
}

fn load_instance_dir(dir: &Path) -> Result<Instance, InstanceError> {
    let nodes_path = dir.join("nodes.csv");
    let file = std::fs::File::open(&nodes_path).map_err(|e| io_err(&nodes_path, e))?;
    let nodes = parse_nodes(file)?;
    let dist_path = dir.join("distance.csv");
    let text = std::fs::read_to_string(&dist_path).map_err(|e| io_err(&dist_path, e))?;
    let distance = parse_distance_csv(&text)?;
    let meta_path = dir.join("instance.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: InstanceMeta = serde_json::from_str(&meta_text)
        .map_err(|e| InstanceError::Validation(format!("bad instance.json: {e}")))?;
    Instance::from_parts(nodes, distance, meta.demand_mean, meta.demand_std, meta.p)
}
