//! Netpbm graymap (P2 ASCII / P5 binary) and 8-bit grayscale PNG.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagepatch::GrayImage;

/// Splits off the next header token, skipping whitespace and `#` comments.
fn next_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Data("unexpected end of PGM header".into()));
    }
    Ok(&buf[start..*pos])
}

fn parse_num(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("bad PGM number {:?}", String::from_utf8_lossy(tok))))
}

/// Decodes a P2 or P5 graymap. Samples are rescaled to `[0, 255]` when the
/// file's maximum value is not 255.
pub fn decode_pgm(buf: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let magic = next_token(buf, &mut pos)?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::Data("not a PGM file (expected P2 or P5)".into())),
    };
    let cols = parse_num(next_token(buf, &mut pos)?)?;
    let rows = parse_num(next_token(buf, &mut pos)?)?;
    let maxval = parse_num(next_token(buf, &mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Data(format!("bad PGM maxval {maxval}")));
    }
    let n = rows * cols;
    let raw: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let data =
            buf.get(pos..pos + need).ok_or_else(|| Error::Data(format!("PGM raster truncated: need {need} bytes")))?;
        if wide {
            data.chunks_exact(2).map(|b| usize::from(u16::from_be_bytes([b[0], b[1]]))).collect()
        } else {
            data.iter().map(|&b| usize::from(b)).collect()
        }
    } else {
        (0..n).map(|_| parse_num(next_token(buf, &mut pos)?)).collect::<Result<_>>()?
    };
    if let Some(&bad) = raw.iter().find(|&&v| v > maxval) {
        return Err(Error::Data(format!("PGM sample {bad} exceeds maxval {maxval}")));
    }
    let pixels = if maxval == 255 {
        raw.iter().map(|&v| v as f64).collect()
    } else {
        raw.iter().map(|&v| v as f64 * 255.0 / maxval as f64).collect()
    };
    GrayImage::new(rows, cols, pixels).map_err(|e| Error::Data(e.to_string()))
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Binary P5 encoding; pixels are rounded and clamped to `[0, 255]`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| to_byte(v)));
    out
}

/// ASCII P2 encoding.
pub fn encode_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.cols(), img.rows());
    for r in 0..img.rows() {
        let row: Vec<String> = (0..img.cols()).map(|c| to_byte(img.get(r, c)).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&encode_pgm(img))?;
    w.flush()?;
    Ok(())
}

pub fn decode_png(buf: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(buf));
    let mut reader = decoder.read_info().map_err(|e| Error::Data(format!("PNG: {e}")))?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Data("PNG too large".into()))?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(|e| Error::Data(format!("PNG: {e}")))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Data(format!("unsupported PNG bit depth {:?}", info.bit_depth)));
    }
    let (rows, cols) = (info.height as usize, info.width as usize);
    let stride = info.line_size;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(Error::Data(format!("unsupported PNG colour type {other:?}"))),
    };
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = &data[r * stride..r * stride + cols * channels];
        pixels.extend(line.chunks_exact(channels).map(|px| f64::from(px[0])));
    }
    GrayImage::new(rows, cols, pixels).map_err(|e| Error::Data(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "pnm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

/// Reads a PGM or PNG file, chosen by extension.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let format = ImageFormat::from_path(path).ok_or_else(|| Error::Data(format!("unsupported image file {path:?}")))?;
    let buf = std::fs::read(path)?;
    match format {
        ImageFormat::Pgm => decode_pgm(&buf),
        ImageFormat::Png => decode_png(&buf),
    }
    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
