//! Text dumps: front arrival fields, site fields (run-length encoded),
//! skeleton paths and effective shapes. Every writer has a reader so the
//! files round-trip.

use std::fmt::Write as _;

use gfront_core::frontprop::FrontField;
use gfront_core::percolation::{PercolationField, Provenance, SkeletonPath, SkeletonStep};
use gfront_core::{Grid, Point};
use thiserror::Error;

use crate::config::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing header field `{0}`")]
    MissingField(&'static str),
    #[error("not a {0} dump")]
    Kind(&'static str),
}

fn perr(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Parse { line, reason: reason.into() }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, FormatError> {
    s.trim().parse().map_err(|_| perr(line, format!("bad number `{s}`")))
}

/// `key=value` pairs of a `#` header line.
fn header_fields(line: &str) -> Vec<(&str, &str)> {
    line.trim_start_matches('#').split_whitespace().filter_map(|kv| kv.split_once('=')).collect()
}

fn field<'a>(fields: &[(&'a str, &'a str)], key: &'static str) -> Result<&'a str, FormatError> {
    fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or(FormatError::MissingField(key))
}

fn triple<T: std::str::FromStr + Copy + Default>(line: usize, s: &str) -> Result<[T; 3], FormatError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(perr(line, format!("expected three components in `{s}`")));
    }
    let mut out = [T::default(); 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(line, p)?;
    }
    Ok(out)
}

fn grid_spec(g: &Grid) -> String {
    let [a, b, c] = g.lo();
    let [n, m, k] = g.shape();
    format!("dim={} h={} lo={a},{b},{c} shape={n},{m},{k}", g.dim(), fmt_f64(g.h()))
}

fn read_grid(line: usize, f: &[(&str, &str)]) -> Result<Grid, FormatError> {
    let dim = num(line, field(f, "dim")?)?;
    let h = num(line, field(f, "h")?)?;
    Grid::new(dim, h, triple(line, field(f, "lo")?)?, triple(line, field(f, "shape")?)?).map_err(|e| perr(line, e.to_string()))
}

/// A front dump read back.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontDump {
    pub grid: Grid,
    pub stencil_radius: u32,
    pub backward: bool,
    pub env_seed: u64,
    pub t_now: f64,
    pub arrival: Vec<f64>,
}

/// Header lines, then `cell,arrival` for every reached cell.
pub fn write_front(front: &FrontField, env_seed: u64) -> String {
    let mut out = String::from("# gfront front v1\n");
    let _ = writeln!(out, "# {}", grid_spec(&front.grid));
    let _ = writeln!(
        out,
        "# stencil={} backward={} env_seed={env_seed} t_now={}",
        front.stencil_radius,
        front.backward,
        fmt_f64(front.t_now)
    );
    out.push_str("cell,arrival (time)\n");
    for (i, a) in front.arrival.iter().enumerate() {
        if a.is_finite() {
            let _ = writeln!(out, "{i},{}", fmt_f64(*a));
        }
    }
    out
}

pub fn read_front(text: &str) -> Result<FrontDump, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "# gfront front v1" => {}
        _ => return Err(FormatError::Kind("front")),
    }
    let (n1, l1) = lines.next().ok_or(FormatError::MissingField("dim"))?;
    let grid = read_grid(n1, &header_fields(l1))?;
    let (n2, l2) = lines.next().ok_or(FormatError::MissingField("stencil"))?;
    let f = header_fields(l2);
    let stencil_radius = num(n2, field(&f, "stencil")?)?;
    let backward = num(n2, field(&f, "backward")?)?;
    let env_seed = num(n2, field(&f, "env_seed")?)?;
    let t_now = num(n2, field(&f, "t_now")?)?;
    lines.next();
    let mut arrival = vec![f64::INFINITY; grid.len()];
    for (n, l) in lines {
        let (c, a) = l.split_once(',').ok_or_else(|| perr(n, "expected `cell,arrival`"))?;
        let c: usize = num(n, c)?;
        *arrival.get_mut(c).ok_or_else(|| perr(n, format!("cell {c} outside the grid")))? = num(n, a)?;
    }
    Ok(FrontDump { grid, stencil_radius, backward, env_seed, t_now, arrival })
}

fn provenance_line(p: &Provenance) -> String {
    match p {
        Provenance::Synthetic { seed, p } => format!("source=synthetic seed={seed} p={}", fmt_f64(*p)),
        Provenance::Environment { seed, tau, probe_radius, h, dependence_radius } => format!(
            "source=environment seed={seed} tau={} probe_radius={} h={} dependence_radius={}",
            fmt_f64(*tau),
            fmt_f64(*probe_radius),
            fmt_f64(*h),
            fmt_f64(*dependence_radius)
        ),
        Provenance::Explicit => "source=explicit".into(),
    }
}

fn read_provenance(line: usize, f: &[(&str, &str)]) -> Result<Provenance, FormatError> {
    let g = |k| -> Result<f64, FormatError> { num(line, field(f, k)?) };
    match field(f, "source")? {
        "synthetic" => Ok(Provenance::Synthetic { seed: num(line, field(f, "seed")?)?, p: g("p")? }),
        "environment" => Ok(Provenance::Environment {
            seed: num(line, field(f, "seed")?)?,
            tau: g("tau")?,
            probe_radius: g("probe_radius")?,
            h: g("h")?,
            dependence_radius: g("dependence_radius")?,
        }),
        "explicit" => Ok(Provenance::Explicit),
        other => Err(perr(line, format!("unknown source `{other}`"))),
    }
}

/// Site field as runs over the grid's linear order: `o<n>` open, `c<n>`
/// closed, wrapped at about 72 columns.
pub fn write_field(field: &PercolationField) -> String {
    let mut out = String::from("# gfront field v1\n");
    let _ = writeln!(out, "# {}", grid_spec(&field.domain));
    let _ = writeln!(out, "# {}", provenance_line(&field.provenance));
    let mut line = String::new();
    let mut i = 0;
    while i < field.open.len() {
        let v = field.open[i];
        let run = field.open[i..].iter().take_while(|b| **b == v).count();
        let tok = format!("{}{run}", if v { 'o' } else { 'c' });
        if !line.is_empty() && line.len() + tok.len() >= 72 {
            out.push_str(&line);
            out.push('\n');
            line.clear();
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&tok);
        i += run;
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn read_field(text: &str) -> Result<PercolationField, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "# gfront field v1" => {}
        _ => return Err(FormatError::Kind("field")),
    }
    let (n1, l1) = lines.next().ok_or(FormatError::MissingField("dim"))?;
    let domain = read_grid(n1, &header_fields(l1))?;
    let (n2, l2) = lines.next().ok_or(FormatError::MissingField("source"))?;
    let provenance = read_provenance(n2, &header_fields(l2))?;
    let mut open = Vec::with_capacity(domain.len());
    for (n, l) in lines {
        for tok in l.split_whitespace() {
            let v = match tok.as_bytes()[0] {
                b'o' => true,
                b'c' => false,
                _ => return Err(perr(n, format!("bad run `{tok}`"))),
            };
            let run: usize = num(n, &tok[1..])?;
            open.extend(std::iter::repeat_n(v, run));
        }
    }
    if open.len() != domain.len() {
        return Err(perr(0, format!("runs cover {} sites, domain has {}", open.len(), domain.len())));
    }
    Ok(PercolationField { domain, open, provenance })
}

fn step_name(s: SkeletonStep) -> &'static str {
    match s {
        SkeletonStep::Start => "start",
        SkeletonStep::Terminal => "terminal",
        SkeletonStep::Advance => "advance",
        SkeletonStep::Detour => "detour",
    }
}

fn step_from_tag(t: u8) -> Option<SkeletonStep> {
    [SkeletonStep::Start, SkeletonStep::Terminal, SkeletonStep::Advance, SkeletonStep::Detour].into_iter().find(|s| s.tag() == t)
}

/// Point list with case tags; counters in the header.
pub fn write_skeleton(path: &SkeletonPath, dim: usize) -> String {
    let mut out = String::from("# gfront skeleton v1\n");
    let _ = writeln!(out, "# dim={dim} detours={} hull_size={} cover_size={}", path.detours, path.hull_size, path.cover_size);
    out.push_str(if dim == 3 { "index,x (length),y (length),z (length),tag,case\n" } else { "index,x (length),y (length),tag,case\n" });
    for (i, (p, s)) in path.points.iter().zip(&path.steps).enumerate() {
        let coords: Vec<String> = (0..dim).map(|k| fmt_f64(p[k])).collect();
        let _ = writeln!(out, "{i},{},{},{}", coords.join(","), s.tag(), step_name(*s));
    }
    out
}

pub fn read_skeleton(text: &str) -> Result<SkeletonPath, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "# gfront skeleton v1" => {}
        _ => return Err(FormatError::Kind("skeleton")),
    }
    let (n1, l1) = lines.next().ok_or(FormatError::MissingField("dim"))?;
    let f = header_fields(l1);
    let dim: usize = num(n1, field(&f, "dim")?)?;
    let mut path = SkeletonPath {
        points: Vec::new(),
        steps: Vec::new(),
        detours: num(n1, field(&f, "detours")?)?,
        hull_size: num(n1, field(&f, "hull_size")?)?,
        cover_size: num(n1, field(&f, "cover_size")?)?,
    };
    lines.next();
    for (n, l) in lines {
        let parts: Vec<&str> = l.split(',').collect();
        if parts.len() != dim + 3 {
            return Err(perr(n, format!("expected {} fields", dim + 3)));
        }
        let mut p = Point::ZERO;
        for k in 0..dim {
            p[k] = num(n, parts[1 + k])?;
        }
        let tag: u8 = num(n, parts[1 + dim])?;
        path.points.push(p);
        path.steps.push(step_from_tag(tag).ok_or_else(|| perr(n, format!("unknown tag {tag}")))?);
    }
    Ok(path)
}

/// One direction of an effective-shape export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeRow {
    pub angle: f64,
    pub theta_bar: f64,
    pub halfwidth: f64,
    pub boundary: Point,
}

pub const SHAPE_HEADER: &str = "angle (rad),theta_bar (time/length),halfwidth (time/length),boundary_x (length),boundary_y (length)\n";

pub fn write_shape(rows: &[ShapeRow]) -> String {
    let mut out = String::from(SHAPE_HEADER);
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.angle),
            fmt_f64(r.theta_bar),
            fmt_f64(r.halfwidth),
            fmt_f64(r.boundary[0]),
            fmt_f64(r.boundary[1])
        );
    }
    out
}

pub fn read_shape(text: &str) -> Result<Vec<ShapeRow>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if format!("{l}\n") == SHAPE_HEADER => {}
        _ => return Err(FormatError::Kind("shape")),
    }
    lines
        .map(|(n, l)| {
            let v: Vec<f64> = l.split(',').map(|s| num(n, s)).collect::<Result<_, _>>()?;
            if v.len() != 5 {
                return Err(perr(n, "expected five fields"));
            }
            Ok(ShapeRow { angle: v[0], theta_bar: v[1], halfwidth: v[2], boundary: Point::new2(v[3], v[4]) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gfront_core::frontprop::evolve_front;
    use gfront_core::percolation::{site_box, skeleton_path, synthetic_field};
    use gfront_core::ZeroField;

    #[test]
    fn front_round_trip() {
        let grid = Grid::centered(2, 0.25, 12).unwrap();
        let front = evolve_front(&ZeroField { dim: 2 }, &grid, &[Point::ZERO], 1.5).unwrap();
        let back = read_front(&write_front(&front, 17)).unwrap();
        assert_eq!(back.grid, front.grid);
        assert_eq!(back.env_seed, 17);
        assert_eq!(back.stencil_radius, front.stencil_radius);
        assert_eq!(back.t_now.to_bits(), front.t_now.to_bits());
        for (a, b) in back.arrival.iter().zip(&front.arrival) {
            assert!(a == b, "{a} vs {b}");
        }
    }

    #[test]
    fn field_round_trip_keeps_provenance() {
        for p in [0.0, 0.5, 0.93, 1.0] {
            let f = synthetic_field(3, site_box(2, -9, 9), p).unwrap();
            let text = write_field(&f);
            assert!(text.lines().all(|l| l.len() < 80));
            assert_eq!(read_field(&text).unwrap(), f);
        }
        let f = synthetic_field(4, site_box(3, -3, 3), 0.7).unwrap();
        assert_eq!(read_field(&write_field(&f)).unwrap(), f);
        let mut e = f.clone();
        e.provenance = Provenance::Environment { seed: 9, tau: 1.5, probe_radius: 0.75, h: 0.125, dependence_radius: 3.0 };
        assert_eq!(read_field(&write_field(&e)).unwrap(), e);
    }

    #[test]
    fn field_with_wrong_length_is_rejected() {
        let f = synthetic_field(3, site_box(2, -2, 2), 0.5).unwrap();
        let text = write_field(&f) + "o1\n";
        assert!(matches!(read_field(&text), Err(FormatError::Parse { .. })));
        assert_eq!(read_field("hello"), Err(FormatError::Kind("field")));
    }

    #[test]
    fn skeleton_round_trip() {
        let f = synthetic_field(11, site_box(2, -20, 20), 0.95).unwrap();
        let path = skeleton_path(&f, Point::new2(-10.2, 0.3), Point::new2(11.4, -3.1)).unwrap();
        let back = read_skeleton(&write_skeleton(&path, 2)).unwrap();
        assert_eq!(back, path);
    }

    #[test]
    fn shape_round_trip() {
        let rows: Vec<ShapeRow> = (0..7)
            .map(|i| {
                let a = i as f64 * 0.9;
                ShapeRow { angle: a, theta_bar: 1.0 / (1.0 + 0.1 * a), halfwidth: 0.01, boundary: Point::new2(a.cos(), a.sin()) }
            })
            .collect();
        assert_eq!(read_shape(&write_shape(&rows)).unwrap(), rows);
    }
}
