//! Plain-text scene specifications for the synthesizer.
//!
//! `key = value` lines plus one `primitive = ...` line per shape:
//!
//! ```text
//! primitive = sphere <cx> <cy> <cz> <r> material <k>|mixed <a...> \
//!             scaling constant <v>|gradient <x|y|z> <lo> <hi> \
//!             tint <v> specular <v>
//! primitive = box <minx miny minz maxx maxy maxz> material ...
//! ```
//!
//! Two specs ship embedded: `desk` (three materials, spatially varying
//! scaling, specular lobes) and `desk-two` (two clean materials for
//! segmentation recovery).

use std::path::Path;

use specfield_core::field::Aabb;
use specfield_core::scene::{
    CameraRig, EndmemberSource, MaterialMix, Primitive, ScalingProfile, SceneSpec, Shape,
};

use crate::error::{CliError, CliResult};

pub const DESK_SCENE: &str = include_str!("../../../scenes/desk.scene");
pub const DESK_TWO_SCENE: &str = include_str!("../../../scenes/desk-two.scene");

/// Resolves `--spec`: the names of bundled scenes or a path on disk.
pub fn load_scene_spec(arg: &str) -> CliResult<SceneSpec> {
    match arg {
        "desk" => parse(DESK_SCENE, Path::new("<bundled desk.scene>")),
        "desk-two" => parse(DESK_TWO_SCENE, Path::new("<bundled desk-two.scene>")),
        path => {
            let p = Path::new(path);
            let bytes = crate::io::read_file(p)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::format(p, "scene file is not valid UTF-8"))?;
            parse(&text, p)
        }
    }
}

struct Tokens<'a> {
    parts: Vec<&'a str>,
    pos: usize,
    path: &'a Path,
    line_no: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> CliResult<&'a str> {
        let t = self.parts.get(self.pos).copied().ok_or_else(|| {
            CliError::format(
                self.path,
                format!("line {}: primitive definition ended early", self.line_no),
            )
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn next_f64(&mut self) -> CliResult<f64> {
        let t = self.next()?;
        t.parse().map_err(|_| {
            CliError::format(
                self.path,
                format!("line {}: expected a number, found {t:?}", self.line_no),
            )
        })
    }

    fn done(&self) -> bool {
        self.pos >= self.parts.len()
    }
}

fn parse_primitive(value: &str, k: usize, path: &Path, line_no: usize) -> CliResult<Primitive> {
    let mut t = Tokens {
        parts: value.split_whitespace().collect(),
        pos: 0,
        path,
        line_no,
    };
    let shape = match t.next()? {
        "sphere" => Shape::Sphere {
            center: [t.next_f64()?, t.next_f64()?, t.next_f64()?],
            radius: t.next_f64()?,
        },
        "box" => Shape::Box {
            min: [t.next_f64()?, t.next_f64()?, t.next_f64()?],
            max: [t.next_f64()?, t.next_f64()?, t.next_f64()?],
        },
        other => {
            return Err(CliError::format(
                path,
                format!("line {line_no}: unknown shape {other:?} (sphere|box)"),
            ))
        }
    };
    let mut material = None;
    let mut scaling = ScalingProfile::Constant(0.9);
    let mut tint = 0.0;
    let mut specular = 0.3;
    while !t.done() {
        match t.next()? {
            "material" => {
                let first = t.next()?;
                material = Some(if first == "mixed" {
                    let mut weights = Vec::with_capacity(k);
                    for _ in 0..k {
                        weights.push(t.next_f64()?);
                    }
                    MaterialMix::Mixed(weights)
                } else {
                    MaterialMix::Pure(first.parse().map_err(|_| {
                        CliError::format(
                            path,
                            format!("line {line_no}: bad material index {first:?}"),
                        )
                    })?)
                });
            }
            "scaling" => {
                scaling = match t.next()? {
                    "constant" => ScalingProfile::Constant(t.next_f64()?),
                    "gradient" => {
                        let axis = match t.next()? {
                            "x" => 0,
                            "y" => 1,
                            "z" => 2,
                            other => {
                                return Err(CliError::format(
                                    path,
                                    format!("line {line_no}: bad axis {other:?}"),
                                ))
                            }
                        };
                        ScalingProfile::AxisGradient {
                            axis,
                            lo: t.next_f64()?,
                            hi: t.next_f64()?,
                        }
                    }
                    other => {
                        return Err(CliError::format(
                            path,
                            format!(
                                "line {line_no}: bad scaling kind {other:?} (constant|gradient)"
                            ),
                        ))
                    }
                };
            }
            "tint" => tint = t.next_f64()?,
            "specular" => specular = t.next_f64()?,
            other => {
                return Err(CliError::format(
                    path,
                    format!("line {line_no}: unknown primitive attribute {other:?}"),
                ))
            }
        }
    }
    let material = material.ok_or_else(|| {
        CliError::format(path, format!("line {line_no}: primitive needs `material`"))
    })?;
    Ok(Primitive {
        shape,
        material,
        scaling,
        tint,
        specular_strength: specular,
    })
}

pub fn parse(text: &str, path: &Path) -> CliResult<SceneSpec> {
    let mut seed: u64 = 0;
    let mut bands: usize = 8;
    let mut endmembers: usize = 0;
    let mut grid = [16usize, 16, 16];
    let mut bounds = Aabb::unit_centered();
    let mut n_train = 20usize;
    let mut n_test = 5usize;
    let mut camera_radius = 3.0;
    let mut image = [64usize, 64];
    let mut focal = 64.0;
    let mut clip = [1.2f64, 5.2];
    let mut samples = 32usize;
    let mut tau = 1.0;
    let mut density_scale = 25.0;
    let mut primitive_lines: Vec<(usize, String)> = Vec::new();

    let bad = |no: usize, msg: String| CliError::format(path, format!("line {no}: {msg}"));

    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(no, "expected `key = value`".into()))?;
        let key = key.trim();
        let value = value.trim();
        let floats = |n: usize| -> CliResult<Vec<f64>> {
            let v: Result<Vec<f64>, _> = value.split_whitespace().map(|x| x.parse()).collect();
            let v = v.map_err(|_| bad(no, format!("bad number in {value:?}")))?;
            if v.len() != n {
                return Err(bad(no, format!("expected {n} values, found {}", v.len())));
            }
            Ok(v)
        };
        match key {
            "seed" => seed = value.parse().map_err(|_| bad(no, "bad seed".into()))?,
            "bands" => bands = value.parse().map_err(|_| bad(no, "bad bands".into()))?,
            "endmembers" => {
                endmembers = value
                    .parse()
                    .map_err(|_| bad(no, "bad endmembers".into()))?
            }
            "grid" => {
                let v = floats(3)?;
                grid = [v[0] as usize, v[1] as usize, v[2] as usize];
            }
            "bounds" => {
                let v = floats(6)?;
                bounds = Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
                    .map_err(|e| bad(no, e.to_string()))?;
            }
            "train_views" => {
                n_train = value.parse().map_err(|_| bad(no, "bad train_views".into()))?
            }
            "test_views" => {
                n_test = value.parse().map_err(|_| bad(no, "bad test_views".into()))?
            }
            "camera_radius" => {
                camera_radius = value
                    .parse()
                    .map_err(|_| bad(no, "bad camera_radius".into()))?
            }
            "image" => {
                let v = floats(2)?;
                image = [v[0] as usize, v[1] as usize];
            }
            "focal" => focal = value.parse().map_err(|_| bad(no, "bad focal".into()))?,
            "clip" => {
                let v = floats(2)?;
                clip = [v[0], v[1]];
            }
            "samples" => samples = value.parse().map_err(|_| bad(no, "bad samples".into()))?,
            "tau" => tau = value.parse().map_err(|_| bad(no, "bad tau".into()))?,
            "density_scale" => {
                density_scale = value
                    .parse()
                    .map_err(|_| bad(no, "bad density_scale".into()))?
            }
            "endmember_source" => {
                if value != "synthetic" {
                    return Err(bad(no, format!("unsupported endmember_source {value:?}")));
                }
            }
            "primitive" => primitive_lines.push((no, value.to_string())),
            other => return Err(bad(no, format!("unknown key {other:?}"))),
        }
    }

    if endmembers == 0 {
        return Err(CliError::format(
            path,
            "scene must set `endmembers` to at least 1",
        ));
    }
    let mut primitives = Vec::with_capacity(primitive_lines.len());
    for (no, line) in &primitive_lines {
        primitives.push(parse_primitive(line, endmembers, path, *no)?);
    }

    let spec = SceneSpec {
        bands,
        endmember_count: endmembers,
        resolution: grid,
        bounds,
        primitives,
        endmember_source: EndmemberSource::Synthetic,
        rig: CameraRig {
            n_train,
            n_test,
            radius: camera_radius,
            width: image[0],
            height: image[1],
            focal_px: focal,
        },
        near: clip[0],
        far: clip[1],
        render_samples: samples,
        tau,
        density_scale,
        seed,
    };
    spec.validate()
        .map_err(|e| CliError::format(path, e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenes_parse() {
        let desk = load_scene_spec("desk").unwrap();
        assert_eq!(desk.endmember_count, 3);
        assert_eq!(desk.rig.n_train, 20);
        assert_eq!(desk.rig.n_test, 5);
        assert_eq!(desk.resolution, [16, 16, 16]);
        assert_eq!(desk.rig.width, 64);

        let two = load_scene_spec("desk-two").unwrap();
        assert_eq!(two.endmember_count, 2);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = parse("bogus = 3\n", Path::new("s.scene"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 1") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn primitive_grammar_round_trips() {
        let text = "\
seed = 3
bands = 6
endmembers = 2
primitive = sphere 0.0 0.1 -0.2 0.4 material 1 scaling gradient z 0.5 0.9 tint 0.25 specular 0.5
primitive = box -0.5 -0.5 -0.5 0.5 0.0 0.5 material mixed 0.75 0.25 scaling constant 0.8
";
        let spec = parse(text, Path::new("s.scene")).unwrap();
        assert_eq!(spec.primitives.len(), 2);
        match &spec.primitives[0].shape {
            Shape::Sphere { center, radius } => {
                assert_eq!(center, &[0.0, 0.1, -0.2]);
                assert_eq!(*radius, 0.4);
            }
            other => panic!("wrong shape {other:?}"),
        }
        assert_eq!(spec.primitives[0].material, MaterialMix::Pure(1));
        assert_eq!(
            spec.primitives[0].scaling,
            ScalingProfile::AxisGradient {
                axis: 2,
                lo: 0.5,
                hi: 0.9
            }
        );
        assert_eq!(
            spec.primitives[1].material,
            MaterialMix::Mixed(vec![0.75, 0.25])
        );
    }

    #[test]
    fn invalid_material_index_is_rejected() {
        let text = "\
seed = 1
bands = 4
endmembers = 1
primitive = sphere 0 0 0 0.5 material 3
";
        assert!(parse(text, Path::new("s.scene")).is_err());
    }
}
