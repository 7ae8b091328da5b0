//! 8-bit grayscale PNG for fringe images, single-channel 32-bit float
//! OpenEXR (uncompressed scanlines) for depth.

use std::io::Cursor;
use std::path::Path;

use exr::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Name of the EXR depth channel.
pub const DEPTH_CHANNEL: &str = "Y";

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Round-trips a [0, 1] raster through 8-bit quantization.
pub fn quantized(raster: &Raster<f64>) -> Raster<f64> {
    raster.map(|&v| quantize_u8(v) as f64 / 255.0)
}

pub fn encode_png(raster: &Raster<f64>) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = raster.as_slice().iter().map(|&v| quantize_u8(v)).collect();
    let img = image::GrayImage::from_raw(raster.width() as u32, raster.height() as u32, bytes)
        .ok_or_else(|| Error::Codec("raster size does not fit a PNG".into()))?;
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out)
}

/// Decodes any PNG to luma in [0, 1].
pub fn decode_png(bytes: &[u8]) -> Result<Raster<f64>> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?
        .into_luma8();
    let (w, h) = img.dimensions();
    Raster::from_vec(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
    )
}

pub fn encode_exr(raster: &Raster<f64>) -> Result<Vec<u8>> {
    let samples: Vec<f32> = raster.as_slice().iter().map(|&v| v as f32).collect();
    let channel = AnyChannel::new(DEPTH_CHANNEL, FlatSamples::F32(samples));
    let layer = Layer::new(
        (raster.width(), raster.height()),
        LayerAttributes::default(),
        Encoding::UNCOMPRESSED,
        AnyChannels::sort(SmallVec::from_vec(vec![channel])),
    );
    let mut out = Vec::new();
    Image::from_layer(layer)
        .write()
        .to_buffered(Cursor::new(&mut out))
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out)
}

/// Reads the depth channel (`Y`, else `Z`, `R`, or the sole channel) of
/// the first layer.
pub fn decode_exr(bytes: &[u8]) -> Result<Raster<f64>> {
    let image = read()
        .no_deep_data()
        .largest_resolution_level()
        .all_channels()
        .first_valid_layer()
        .all_attributes()
        .from_buffered(Cursor::new(bytes))
        .map_err(|e| Error::Codec(e.to_string()))?;
    let layer = &image.layer_data;
    let channels = &layer.channel_data.list;
    let pick = ["Y", "Z", "R"]
        .iter()
        .find_map(|name| channels.iter().find(|c| c.name.to_string() == *name))
        .or_else(|| (channels.len() == 1).then(|| &channels[0]))
        .ok_or_else(|| Error::Codec("EXR has no depth channel".into()))?;
    let size = layer.size;
    Raster::from_vec(
        size.width(),
        size.height(),
        pick.sample_data.values_as_f32().map(|v| v as f64).collect(),
    )
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temporary file and a rename, so a reader never
/// sees a truncated file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_png(path: impl AsRef<Path>, raster: &Raster<f64>) -> Result<()> {
    write_file(path.as_ref(), &encode_png(raster)?)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Raster<f64>> {
    let path = path.as_ref();
    decode_png(&read_bytes(path)?).map_err(|e| annotate(path, e))
}

pub fn write_exr(path: impl AsRef<Path>, raster: &Raster<f64>) -> Result<()> {
    write_file(path.as_ref(), &encode_exr(raster)?)
}

pub fn read_exr(path: impl AsRef<Path>) -> Result<Raster<f64>> {
    let path = path.as_ref();
    decode_exr(&read_bytes(path)?).map_err(|e| annotate(path, e))
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Codec(m) => Error::Codec(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exr_preserves_f32_bits() {
        let r = Raster::from_fn(7, 5, |x, y| 1.5 + 0.001 * (x * 5 + y) as f64 + 1e-9);
        let back = decode_exr(&encode_exr(&r).unwrap()).unwrap();
        assert_eq!(back.dims(), (7, 5));
        for (a, b) in r.as_slice().iter().zip(back.as_slice()) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
    }

    #[test]
    fn exr_is_uncompressed_scanline() {
        let r = Raster::filled(4, 3, 2.0);
        let bytes = encode_exr(&r).unwrap();
        let meta = exr::meta::MetaData::read_from_buffered(Cursor::new(&bytes), false).unwrap();
        let header = &meta.headers[0];
        assert_eq!(header.compression, exr::compression::Compression::Uncompressed);
        assert_eq!(header.blocks, exr::meta::BlockDescription::ScanLines);
        assert_eq!(header.channels.list.len(), 1);
        assert_eq!(header.channels.list[0].sample_type, exr::meta::attribute::SampleType::F32);
    }

    #[test]
    fn png_quantizes_to_8_bit() {
        let r = Raster::from_vec(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let back = decode_png(&encode_png(&r).unwrap()).unwrap();
        assert_eq!(back.as_slice(), &[0.0, 128.0 / 255.0, 1.0]);
        assert_eq!(back, quantized(&r));
    }

    #[test]
    fn bad_bytes_are_codec_errors() {
        assert!(matches!(decode_png(b"nope"), Err(Error::Codec(_))));
        assert!(matches!(decode_exr(b"nope"), Err(Error::Codec(_))));
    }
}
