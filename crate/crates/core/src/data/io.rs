//! ESRI ASCII grids and `x,y,bed` pick tables.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::Pick;
use crate::error::{Error, Result};
use crate::grid::{Geometry, RasterGrid};

const DEFAULT_NODATA: f64 = -9999.0;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Formats with nine significant digits, dropping trailing zeros.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

/// Parses an ESRI ASCII grid. The first data row is the northernmost, so rows
/// are reversed into the crate's south-up order.
pub fn parse_raster(text: impl Read) -> Result<RasterGrid> {
    let reader = BufReader::new(text);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut ncols = None;
    let mut nrows = None;
    let mut x0 = None;
    let mut y0 = None;
    let mut centre_ref = false;
    let mut cellsize = None;
    let mut nodata = None;
    let mut pending: Option<(usize, String)> = None;
    for (no, line) in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let mut parts = t.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_lowercase();
        if key.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
            pending = Some((no, line));
            break;
        }
        let val = parts.next().ok_or_else(|| parse_err(no, format!("header key {key} has no value")))?;
        if parts.next().is_some() {
            return Err(parse_err(no, format!("header line for {key} has extra fields")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(no, format!("bad value {s:?} for {key}")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| parse_err(no, format!("bad count {s:?} for {key}")));
        match key.as_str() {
            "ncols" => ncols = Some(int(val)?),
            "nrows" => nrows = Some(int(val)?),
            "xllcorner" => x0 = Some(num(val)?),
            "yllcorner" => y0 = Some(num(val)?),
            "xllcenter" => {
                x0 = Some(num(val)?);
                centre_ref = true;
            }
            "yllcenter" => {
                y0 = Some(num(val)?);
                centre_ref = true;
            }
            "cellsize" => cellsize = Some(num(val)?),
            "nodata_value" => nodata = Some(num(val)?),
            _ => return Err(parse_err(no, format!("unknown header key {key:?}"))),
        }
    }
    let missing = |k: &str| parse_err(0, format!("header is missing {k}"));
    let (w, h) = (ncols.ok_or_else(|| missing("ncols"))?, nrows.ok_or_else(|| missing("nrows"))?);
    let cell = cellsize.ok_or_else(|| missing("cellsize"))?;
    let (mut ox, mut oy) = (x0.ok_or_else(|| missing("xllcorner"))?, y0.ok_or_else(|| missing("yllcorner"))?);
    if centre_ref {
        ox -= 0.5 * cell;
        oy -= 0.5 * cell;
    }
    let geom = Geometry::new(h, w, cell, (ox, oy))?;
    let mut values = vec![0.0; h * w];
    let mut row = 0usize;
    let rest = lines.map(|(n, l)| l.map(|l| (n, l)));
    for item in pending.into_iter().map(Ok).chain(rest) {
        let (no, line) = item?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if row == h {
            return Err(parse_err(no, format!("more than {h} data rows")));
        }
        let dest = h - 1 - row;
        let mut n = 0;
        for tok in t.split_whitespace() {
            if n == w {
                return Err(parse_err(no, format!("row has more than {w} values")));
            }
            let v: f64 = tok.parse().map_err(|_| parse_err(no, format!("non-numeric cell {tok:?}")))?;
            values[dest * w + n] = v;
            n += 1;
        }
        if n != w {
            return Err(parse_err(no, format!("row has {n} values, expected {w}")));
        }
        row += 1;
    }
    if row != h {
        return Err(parse_err(0, format!("found {row} data rows, expected {h}")));
    }
    Ok(RasterGrid::new(geom, values)?.with_nodata(nodata))
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    parse_raster(fs::File::open(path)?)
}

/// Writes an ESRI ASCII grid. Non-finite and nodata cells are written as the
/// grid's nodata value (or -9999 when it has none).
pub fn write_raster_to(mut out: impl Write, grid: &RasterGrid) -> Result<()> {
    let g = grid.geometry();
    let nodata = grid.nodata().unwrap_or(DEFAULT_NODATA);
    let valid = grid.valid_mask();
    let mut buf = String::new();
    buf.push_str(&format!("ncols {}\nnrows {}\n", g.width, g.height));
    // Geometry keeps full precision so grids line up after a round trip.
    buf.push_str(&format!("xllcorner {}\nyllcorner {}\n", g.origin.0, g.origin.1));
    buf.push_str(&format!("cellsize {}\nNODATA_value {}\n", g.spacing, format_sig9(nodata)));
    for r in (0..g.height).rev() {
        let row: Vec<String> = (0..g.width)
            .map(|c| if valid.get(r, c) { format_sig9(grid.get(r, c)) } else { format_sig9(nodata) })
            .collect();
        buf.push_str(&row.join(" "));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_raster(path: impl AsRef<Path>, grid: &RasterGrid) -> Result<()> {
    let f = fs::File::create(path)?;
    write_raster_to(std::io::BufWriter::new(f), grid)
}

pub fn parse_picks(text: impl Read) -> Result<Vec<Pick>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "bed"] {
        return Err(parse_err(1, format!("expected header x,y,bed, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<Pick>() {
        let pick = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        out.push(pick);
    }
    Ok(out)
}

pub fn read_picks(path: impl AsRef<Path>) -> Result<Vec<Pick>> {
    parse_picks(fs::File::open(path)?)
}

pub fn write_picks_to(out: impl Write, picks: &[Pick]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "bed"]).map_err(csv_io)?;
    for p in picks {
        w.write_record([format!("{}", p.x), format!("{}", p.y), format_sig9(p.bed)]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_picks(path: impl AsRef<Path>, picks: &[Pick]) -> Result<()> {
    write_picks_to(fs::File::create(path)?, picks)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RadarPicks;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.5), "1.5");
        assert_eq!(format_sig9(-1234.56789012), "-1234.56789");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1.0e-7), "1e-7");
        assert_eq!(format_sig9(0.000123456789123), "0.000123456789");
    }

    #[test]
    fn raster_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Geometry::new(5, 4, 150.0, (-1000.5, 2000.25)).unwrap();
        let grid = RasterGrid::new(g, (0..20).map(|_| rng.random_range(-999.0..999.0)).collect()).unwrap();
        let mut buf = Vec::new();
        write_raster_to(&mut buf, &grid).unwrap();
        let back = parse_raster(buf.as_slice()).unwrap();
        assert_eq!(back.geometry(), grid.geometry());
        for (a, b) in back.values().iter().zip(grid.values()) {
            assert!((a - b).abs() < 1e-6);
        }
        // Top text row is the northernmost grid row.
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().nth(6).unwrap().split(' ').next().unwrap().parse::<f64>().unwrap();
        assert!((first - grid.get(4, 0)).abs() < 1e-6);
    }

    #[test]
    fn nodata_maps_to_invalid() {
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 -9999 6\n7 8 9\n";
        let g = parse_raster(text.as_bytes()).unwrap();
        let m = g.valid_mask();
        assert_eq!(m.count(), 8);
        assert!(!m.get(1, 1));
        assert_eq!(g.get(0, 0), 7.0);
        assert_eq!(g.get(2, 2), 3.0);
    }

    #[test]
    fn malformed_rasters_report_lines() {
        let short = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5\n7 8 9\n";
        assert!(matches!(parse_raster(short.as_bytes()), Err(Error::Parse { line: 7, .. })));
        let bad = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 x 6\n7 8 9\n";
        assert!(matches!(parse_raster(bad.as_bytes()), Err(Error::Parse { line: 7, .. })));
        let header = "ncols three\n";
        assert!(matches!(parse_raster(header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let missing = "ncols 3\nnrows 3\ncellsize 1\n1 2 3\n";
        assert!(matches!(parse_raster(missing.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn picks_round_trip_and_clip() {
        let picks = vec![Pick { x: 1.5, y: 2.5, bed: -100.25 }, Pick { x: 50.0, y: 0.5, bed: 3.0 }];
        let mut buf = Vec::new();
        write_picks_to(&mut buf, &picks).unwrap();
        let back = parse_picks(buf.as_slice()).unwrap();
        assert_eq!(back, picks);
        let g = Geometry::unit(4, 4).unwrap();
        let ing = RadarPicks::ingest(back, &g);
        assert_eq!((ing.picks.len(), ing.dropped), (1, 1));
    }

    #[test]
    fn bad_pick_rows_report_lines() {
        let text = "x,y,bed\n1,2,3\n4,five,6\n";
        assert!(matches!(parse_picks(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_picks("a,b,c\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
