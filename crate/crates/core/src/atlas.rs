//! Brain atlases: region identities, macro areas and sphere coordinates.
//!
//! Atlases are stored as CSV with header `id,name,macro_area,hemisphere,cx,cy,cz`.
//! Hemisphere is one of `L`, `R` or `subcortical`. Coordinates may be left
//! blank for regions that have no spherical surface position.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hemisphere {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
    #[serde(rename = "subcortical")]
    Subcortical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub name: String,
    pub macro_area: String,
    pub hemisphere: Hemisphere,
    /// Unit vector on the hemisphere's sphere.
    pub sphere_coord: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    regions: Vec<Region>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AtlasRow {
    id: usize,
    name: String,
    macro_area: String,
    hemisphere: Hemisphere,
    cx: Option<f64>,
    cy: Option<f64>,
    cz: Option<f64>,
}

impl Atlas {
    /// Validates ids (unique, contiguous from 0, in order) and coordinate norms.
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::invalid("atlas has no regions"));
        }
        for (i, r) in regions.iter().enumerate() {
            if r.id != i {
                return Err(Error::invalid(format!(
                    "atlas ids must be contiguous from 0 in file order; row {i} has id {}",
                    r.id
                )));
            }
            if let Some(c) = r.sphere_coord {
                let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(format!(
                        "region {} sphere coordinate has norm {norm}",
                        r.id
                    )));
                }
            }
        }
        Ok(Self { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> Option<&Region> {
        self.regions.get(id)
    }

    /// Region ids grouped by macro area, areas in first-appearance order.
    pub fn macro_areas(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<String> = Vec::new();
        let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for r in &self.regions {
            if !members.contains_key(&r.macro_area) {
                order.push(r.macro_area.clone());
            }
            members.entry(r.macro_area.clone()).or_default().push(r.id);
        }
        order
            .into_iter()
            .map(|name| {
                let ids = members.remove(&name).unwrap_or_default();
                (name, ids)
            })
            .collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut regions = Vec::new();
        for row in rdr.deserialize() {
            let row: AtlasRow = row?;
            let sphere_coord = match (row.cx, row.cy, row.cz) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                (None, None, None) => None,
                _ => {
                    return Err(Error::invalid(format!(
                        "region {} has a partial sphere coordinate",
                        row.id
                    )))
                }
            };
            regions.push(Region {
                id: row.id,
                name: row.name,
                macro_area: row.macro_area,
                hemisphere: row.hemisphere,
                sphere_coord,
            });
        }
        Self::new(regions)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.regions {
            let c = r.sphere_coord;
            wtr.serialize(AtlasRow {
                id: r.id,
                name: r.name.clone(),
                macro_area: r.macro_area.clone(),
                hemisphere: r.hemisphere,
                cx: c.map(|c| c[0]),
                cy: c.map(|c| c[1]),
                cz: c.map(|c| c[2]),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Synthetic atlas with `n_regions` regions.
    ///
    /// About 34/394 of the regions are subcortical; the cortical rest is split
    /// between hemispheres, placed on a Fibonacci lattice on the left sphere and
    /// mirrored in x for the right one. Cortical regions are grouped into 22
    /// spatially coherent macro areas per hemisphere. With the default
    /// `n_regions = 394` this gives 180 + 180 cortical and 34 subcortical regions.
    pub fn synthetic(n_regions: usize) -> Result<Self> {
        if n_regions < 3 {
            return Err(Error::invalid("synthetic atlas needs at least 3 regions"));
        }
        let n_sub = ((n_regions as f64) * 34.0 / 394.0).round().max(1.0) as usize;
        let n_cortical = n_regions - n_sub;
        let n_left = n_cortical.div_ceil(2);
        let n_right = n_cortical - n_left;

        let left = fibonacci_sphere(n_left);
        let n_macro = MACRO_AREAS.len().min(n_left.max(1));
        let anchors = fibonacci_sphere(n_macro);
        let macro_of = |p: &[f64; 3]| -> usize {
            (0..n_macro)
                .max_by(|&a, &b| dot(p, &anchors[a]).total_cmp(&dot(p, &anchors[b])))
                .unwrap_or(0)
        };

        let mut regions = Vec::with_capacity(n_regions);
        for (i, p) in left.iter().enumerate() {
            regions.push(Region {
                id: regions.len(),
                name: format!("L_{:03}", i),
                macro_area: MACRO_AREAS[macro_of(p)].to_string(),
                hemisphere: Hemisphere::Left,
                sphere_coord: Some(*p),
            });
        }
        for (i, p) in left.iter().take(n_right).enumerate() {
            regions.push(Region {
                id: regions.len(),
                name: format!("R_{:03}", i),
                macro_area: MACRO_AREAS[macro_of(p)].to_string(),
                hemisphere: Hemisphere::Right,
                sphere_coord: Some([-p[0], p[1], p[2]]),
            });
        }
        for i in 0..n_sub {
            regions.push(Region {
                id: regions.len(),
                name: format!("S_{:03}", i),
                macro_area: "Subcortical".to_string(),
                hemisphere: Hemisphere::Subcortical,
                sphere_coord: None,
            });
        }
        Self::new(regions)
    }
}

const MACRO_AREAS: [&str; 22] = [
    "Primary Visual Cortex",
    "Early Visual Cortex",
    "Dorsal Stream Visual Cortex",
    "Ventral Stream Visual Cortex",
    "MT+ Complex",
    "Somatosensory and Motor Cortex",
    "Paracentral Lobular and Mid Cingulate Cortex",
    "Premotor Cortex",
    "Posterior Opercular Cortex",
    "Early Auditory Cortex",
    "Auditory Association Cortex",
    "Insular and Frontal Opercular Cortex",
    "Medial Temporal Cortex",
    "Lateral Temporal Cortex",
    "Temporo-Parieto-Occipital Junction",
    "Superior Parietal Cortex",
    "Inferior Parietal Cortex",
    "Posterior Cingulate Cortex",
    "Anterior Cingulate and Medial Prefrontal Cortex",
    "Orbital and Polar Frontal Cortex",
    "Inferior Frontal Cortex",
    "Dorsolateral Prefrontal Cortex",
];

/// `n` nearly uniform unit vectors.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * i as f64;
            let v = [r * theta.cos(), r * theta.sin(), z];
            let norm = dot(&v, &v).sqrt();
            [v[0] / norm, v[1] / norm, v[2] / norm]
        })
        .collect()
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
