//! Binary dataset ingestion: IDX, CIFAR binary, the canonical `dset`
//! container, and PNG class directories.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::Dataset;
use crate::error::{Error, Result};

/// On-disk dataset formats understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Big-endian IDX files (images magic 0x00000803, labels 0x00000801) in
    /// a directory named `train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
    /// `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`.
    Idx,
    /// Directory of CIFAR-10-style binaries: records of 1 label byte plus
    /// 3072 channel-planar pixel bytes; `data_batch*.bin` train files and a
    /// `test_batch.bin` test file.
    CifarBin,
    /// Canonical little-endian container: two consecutive blocks (train,
    /// then test), each `"DSET"`, u32 version=1, u32 n, u32 h, u32 w,
    /// u32 c, u32 n_class, n u32 labels, n*h*w*c u8 pixels (channel-last,
    /// row-major).
    Dset,
    /// `root/<class_name>/<image>.png` with classes ordered by lexicographic
    /// directory name; an optional `root/{train,test}/<class_name>/` layout
    /// carries an explicit split, otherwise a per-class 80/20 split by
    /// sorted file name is applied.
    PngDir,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(Format::Idx),
            "cifar_bin" => Ok(Format::CifarBin),
            "dset" => Ok(Format::Dset),
            "png_dir" => Ok(Format::PngDir),
            other => Err(Error::invalid(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let ds = match format {
        Format::Idx => load_idx_dir(path)?,
        Format::CifarBin => load_cifar_dir(path)?,
        Format::Dset => load_dset(path)?,
        Format::PngDir => load_png_dir(path)?,
    };
    ds.validate()?;
    Ok(ds)
}

fn dataset_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

// ---------------------------------------------------------------- dset ----

const DSET_MAGIC: &[u8; 4] = b"DSET";
const DSET_VERSION: u32 = 1;

struct DsetBlock {
    h: u32,
    w: u32,
    c: u32,
    n_class: u32,
    labels: Vec<u32>,
    pixels: Vec<u8>,
}

fn read_u32_le(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_block(r: &mut impl Read, path: &Path) -> Result<DsetBlock> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != DSET_MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:?}")));
    }
    let version = read_u32_le(r, path)?;
    if version != DSET_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let n = read_u32_le(r, path)?;
    let h = read_u32_le(r, path)?;
    let w = read_u32_le(r, path)?;
    let c = read_u32_le(r, path)?;
    let n_class = read_u32_le(r, path)?;
    let mut labels = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let y = read_u32_le(r, path)?;
        if y >= n_class {
            return Err(Error::Data(format!(
                "{}: label {y} out of range for {n_class} classes",
                path.display()
            )));
        }
        labels.push(y);
    }
    let mut pixels = vec![0u8; n as usize * h as usize * w as usize * c as usize];
    r.read_exact(&mut pixels).map_err(|e| Error::io(path, e))?;
    Ok(DsetBlock {
        h,
        w,
        c,
        n_class,
        labels,
        pixels,
    })
}

/// Load a canonical dset file (train block followed by test block).
pub fn load_dset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let train = read_block(&mut r, path)?;
    let test = read_block(&mut r, path)?;
    if !r.is_empty() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after the test block", r.len()),
        ));
    }
    if (train.h, train.w, train.c, train.n_class) != (test.h, test.w, test.c, test.n_class) {
        return Err(Error::format(
            path,
            "train and test blocks disagree on image shape or class count",
        ));
    }
    Ok(Dataset {
        id: dataset_id(path),
        h: train.h as usize,
        w: train.w as usize,
        c: train.c as usize,
        n_class: train.n_class as usize,
        x_train: train.pixels,
        y_train: train.labels,
        x_test: test.pixels,
        y_test: test.labels,
    })
}

fn write_block(out: &mut Vec<u8>, ds: &Dataset, labels: &[u32], pixels: &[u8]) {
    out.extend_from_slice(DSET_MAGIC);
    out.extend_from_slice(&DSET_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.h as u32).to_le_bytes());
    out.extend_from_slice(&(ds.w as u32).to_le_bytes());
    out.extend_from_slice(&(ds.c as u32).to_le_bytes());
    out.extend_from_slice(&(ds.n_class as u32).to_le_bytes());
    for &y in labels {
        out.extend_from_slice(&y.to_le_bytes());
    }
    out.extend_from_slice(pixels);
}

/// Serialize to the canonical dset byte stream.
pub fn dset_bytes(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_block(&mut out, ds, &ds.y_train, &ds.x_train);
    write_block(&mut out, ds, &ds.y_test, &ds.x_test);
    out
}

/// Write the dataset as a canonical dset file.
pub fn save_dset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&dset_bytes(ds)).map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ----------------------------------------------------------------- idx ----

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_be_bytes(buf))
}

/// One IDX image file: magic, n, h, w, then raw grayscale bytes.
fn load_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let magic = read_u32_be(&mut r, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(path, format!("bad image magic {magic:#010x}")));
    }
    let n = read_u32_be(&mut r, path)? as usize;
    let h = read_u32_be(&mut r, path)? as usize;
    let w = read_u32_be(&mut r, path)? as usize;
    let mut pixels = vec![0u8; n * h * w];
    r.read_exact(&mut pixels).map_err(|e| Error::io(path, e))?;
    Ok((n, h, w, pixels))
}

fn load_idx_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let magic = read_u32_be(&mut r, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(path, format!("bad label magic {magic:#010x}")));
    }
    let n = read_u32_be(&mut r, path)? as usize;
    let mut raw = vec![0u8; n];
    r.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    Ok(raw.into_iter().map(u32::from).collect())
}

fn load_idx_dir(dir: &Path) -> Result<Dataset> {
    let (n_train, h, w, x_train) = load_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let y_train = load_idx_labels(&dir.join("train-labels-idx1-ubyte"))?;
    let (n_test, h2, w2, x_test) = load_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
    let y_test = load_idx_labels(&dir.join("t10k-labels-idx1-ubyte"))?;
    if y_train.len() != n_train || y_test.len() != n_test {
        return Err(Error::Data(format!(
            "{}: image and label counts disagree",
            dir.display()
        )));
    }
    if (h, w) != (h2, w2) {
        return Err(Error::Data(format!(
            "{}: train and test image sizes disagree",
            dir.display()
        )));
    }
    let n_class = y_train
        .iter()
        .chain(&y_test)
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1);
    Ok(Dataset {
        id: dataset_id(dir),
        h,
        w,
        c: 1,
        n_class,
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

// ----------------------------------------------------------- cifar_bin ----

const CIFAR_SIDE: usize = 32;
const CIFAR_RECORD: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

/// Parse one CIFAR binary file into (labels, channel-last pixels).
fn load_cifar_file(path: &Path) -> Result<(Vec<u32>, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::format(
            path,
            format!("size {} is not a multiple of {CIFAR_RECORD}-byte records", bytes.len()),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let px = CIFAR_SIDE * CIFAR_SIDE;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = vec![0u8; n * px * 3];
    for rec in 0..n {
        let r = &bytes[rec * CIFAR_RECORD..(rec + 1) * CIFAR_RECORD];
        labels.push(r[0] as u32);
        // channel-planar -> channel-last
        let planes = &r[1..];
        let dst = &mut pixels[rec * px * 3..(rec + 1) * px * 3];
        for p in 0..px {
            dst[p * 3] = planes[p];
            dst[p * 3 + 1] = planes[px + p];
            dst[p * 3 + 2] = planes[2 * px + p];
        }
    }
    Ok((labels, pixels))
}

fn load_cifar_dir(dir: &Path) -> Result<Dataset> {
    let mut train_files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("data_batch") && n.ends_with(".bin"))
        })
        .collect();
    train_files.sort();
    if train_files.is_empty() {
        return Err(Error::format(dir, "no data_batch*.bin files found"));
    }
    let mut y_train = Vec::new();
    let mut x_train = Vec::new();
    for f in &train_files {
        let (labels, pixels) = load_cifar_file(f)?;
        y_train.extend(labels);
        x_train.extend(pixels);
    }
    let (y_test, x_test) = load_cifar_file(&dir.join("test_batch.bin"))?;
    let n_class = y_train
        .iter()
        .chain(&y_test)
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1);
    Ok(Dataset {
        id: dataset_id(dir),
        h: CIFAR_SIDE,
        w: CIFAR_SIDE,
        c: 3,
        n_class,
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

// ------------------------------------------------------------- png_dir ----

fn class_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut dirs: Vec<(String, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .collect();
    // Lexicographic directory order fixes the class indexing.
    dirs.sort();
    Ok(dirs)
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

struct PngShape {
    h: usize,
    w: usize,
    c: usize,
}

fn decode_png(path: &Path, shape: &mut Option<PngShape>) -> Result<Vec<u8>> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let (c, h, w, raw) = match img {
        image::DynamicImage::ImageLuma8(g) => {
            (1usize, g.height() as usize, g.width() as usize, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            (3usize, rgb.height() as usize, rgb.width() as usize, rgb.into_raw())
        }
    };
    match shape {
        None => *shape = Some(PngShape { h, w, c }),
        Some(s) => {
            if (s.h, s.w, s.c) != (h, w, c) {
                return Err(Error::Data(format!(
                    "{}: image is {h}x{w}x{c} but the first image was {}x{}x{}",
                    path.display(),
                    s.h,
                    s.w,
                    s.c
                )));
            }
        }
    }
    Ok(raw)
}

fn load_png_split(
    root: &Path,
    shape: &mut Option<PngShape>,
    classes: &[(String, PathBuf)],
) -> Result<(Vec<u8>, Vec<u32>)> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for (class_idx, (_, dir)) in classes.iter().enumerate() {
        for file in png_files(dir)? {
            pixels.extend(decode_png(&file, shape)?);
            labels.push(class_idx as u32);
        }
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{}: no png images found", root.display())));
    }
    Ok((pixels, labels))
}

fn load_png_dir(root: &Path) -> Result<Dataset> {
    let top = class_dirs(root)?;
    let has_split = top.len() == 2 && top[0].0 == "test" && top[1].0 == "train";
    let mut shape = None;

    let (x_train, y_train, x_test, y_test, n_class) = if has_split {
        let train_classes = class_dirs(&root.join("train"))?;
        let test_classes = class_dirs(&root.join("test"))?;
        let names: Vec<&String> = train_classes.iter().map(|(n, _)| n).collect();
        let test_names: Vec<&String> = test_classes.iter().map(|(n, _)| n).collect();
        if names != test_names {
            return Err(Error::Data(format!(
                "{}: train and test class directories disagree",
                root.display()
            )));
        }
        let (x_train, y_train) = load_png_split(root, &mut shape, &train_classes)?;
        let (x_test, y_test) = load_png_split(root, &mut shape, &test_classes)?;
        (x_train, y_train, x_test, y_test, train_classes.len())
    } else {
        // Flat layout: deterministic per-class 80/20 split by sorted name.
        let mut x_train = Vec::new();
        let mut y_train = Vec::new();
        let mut x_test = Vec::new();
        let mut y_test = Vec::new();
        for (class_idx, (_, dir)) in top.iter().enumerate() {
            let files = png_files(dir)?;
            let n = files.len();
            let n_test = if n >= 2 { (n / 5).max(1) } else { 0 };
            for (i, file) in files.iter().enumerate() {
                let raw = decode_png(file, &mut shape)?;
                if i < n - n_test {
                    x_train.extend(raw);
                    y_train.push(class_idx as u32);
                } else {
                    x_test.extend(raw);
                    y_test.push(class_idx as u32);
                }
            }
        }
        (x_train, y_train, x_test, y_test, top.len())
    };

    let shape = shape.ok_or_else(|| Error::Data(format!("{}: no images", root.display())))?;
    Ok(Dataset {
        id: dataset_id(root),
        h: shape.h,
        w: shape.w,
        c: shape.c,
        n_class,
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        Dataset {
            id: "t".into(),
            h: 2,
            w: 2,
            c: 1,
            n_class: 2,
            x_train: vec![0, 255, 0, 255],
            y_train: vec![1],
            x_test: vec![9, 8, 7, 6],
            y_test: vec![0],
        }
    }

    #[test]
    fn dset_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.dset");
        let ds = tiny_dataset();
        save_dset(&ds, &path).unwrap();
        let bytes_before = fs::read(&path).unwrap();
        let loaded = load_dataset(&path, Format::Dset).unwrap();
        assert_eq!(loaded.x_train, ds.x_train);
        assert_eq!(loaded.y_train, ds.y_train);
        save_dset(&loaded, &path).unwrap();
        let bytes_after = fs::read(&path).unwrap();
        assert_eq!(bytes_before, bytes_after);
    }

    #[test]
    fn dset_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.dset");
        let mut bytes = dset_bytes(&tiny_dataset());
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_dataset(&path, Format::Dset),
            Err(Error::Format { .. })
        ));

        let good = dset_bytes(&tiny_dataset());
        fs::write(&path, &good[..good.len() - 2]).unwrap();
        assert!(matches!(
            load_dataset(&path, Format::Dset),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn dset_rejects_label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.dset");
        let mut ds = tiny_dataset();
        ds.y_train = vec![7]; // > n_class, bypassing validate by writing directly
        fs::write(&path, dset_bytes(&ds)).unwrap();
        assert!(matches!(
            load_dataset(&path, Format::Dset),
            Err(Error::Data(_))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        // save -> load -> save reproduces the canonical byte stream exactly.
        #[test]
        fn dset_bytes_round_trip(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let (h, w, c) = (rng.gen_range(1..5usize), rng.gen_range(1..5usize), rng.gen_range(1..3usize));
            let n_class = rng.gen_range(2..5usize);
            let d = h * w * c;
            let n_train = rng.gen_range(1..6usize);
            let n_test = rng.gen_range(1..4usize);
            let ds = Dataset {
                id: "prop".into(),
                h, w, c, n_class,
                x_train: (0..n_train * d).map(|_| rng.gen()).collect(),
                y_train: (0..n_train).map(|_| rng.gen_range(0..n_class as u32)).collect(),
                x_test: (0..n_test * d).map(|_| rng.gen()).collect(),
                y_test: (0..n_test).map(|_| rng.gen_range(0..n_class as u32)).collect(),
            };
            let bytes = dset_bytes(&ds);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.dset");
            fs::write(&path, &bytes).unwrap();
            let loaded = load_dataset(&path, Format::Dset).unwrap();
            proptest::prop_assert_eq!(dset_bytes(&loaded), bytes);
        }
    }

    #[test]
    fn idx_parses_magic_and_dims() {
        let dir = tempfile::tempdir().unwrap();
        let write_images = |name: &str, n: u32| {
            let mut b = Vec::new();
            b.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
            b.extend_from_slice(&n.to_be_bytes());
            b.extend_from_slice(&2u32.to_be_bytes());
            b.extend_from_slice(&2u32.to_be_bytes());
            b.extend(std::iter::repeat_n(7u8, (n * 4) as usize));
            fs::write(dir.path().join(name), b).unwrap();
        };
        let write_labels = |name: &str, labels: &[u8]| {
            let mut b = Vec::new();
            b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
            b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
            b.extend_from_slice(labels);
            fs::write(dir.path().join(name), b).unwrap();
        };
        write_images("train-images-idx3-ubyte", 4);
        write_labels("train-labels-idx1-ubyte", &[0, 1, 2, 1]);
        write_images("t10k-images-idx3-ubyte", 2);
        write_labels("t10k-labels-idx1-ubyte", &[2, 0]);

        let ds = load_dataset(dir.path(), Format::Idx).unwrap();
        assert_eq!((ds.h, ds.w, ds.c), (2, 2, 1));
        assert_eq!(ds.n_class, 3);
        assert_eq!(ds.n_train(), 4);
        assert_eq!(ds.x_train[0], 7);
    }

    #[test]
    fn cifar_records_deinterleave_planes() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = vec![1u8]; // label
        rec.extend(std::iter::repeat_n(10u8, 1024)); // R plane
        rec.extend(std::iter::repeat_n(20u8, 1024)); // G plane
        rec.extend(std::iter::repeat_n(30u8, 1024)); // B plane
        fs::write(dir.path().join("data_batch_1.bin"), &rec).unwrap();
        let mut test = rec.clone();
        test[0] = 0;
        fs::write(dir.path().join("test_batch.bin"), &test).unwrap();

        let ds = load_dataset(dir.path(), Format::CifarBin).unwrap();
        assert_eq!((ds.h, ds.w, ds.c), (32, 32, 3));
        assert_eq!(&ds.x_train[..6], &[10, 20, 30, 10, 20, 30]);
        assert_eq!(ds.y_train, vec![1]);
        assert_eq!(ds.y_test, vec![0]);
    }

    #[test]
    fn png_dir_classes_follow_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        for (class, value) in [("zebra", 200u8), ("ant", 50u8)] {
            let cdir = dir.path().join(class);
            fs::create_dir(&cdir).unwrap();
            for i in 0..3 {
                let img = image::GrayImage::from_pixel(2, 2, image::Luma([value + i]));
                img.save(cdir.join(format!("{i}.png"))).unwrap();
            }
        }
        let ds = load_dataset(dir.path(), Format::PngDir).unwrap();
        assert_eq!(ds.n_class, 2);
        assert_eq!(ds.n_train() + ds.n_test(), 6);
        // "ant" sorts before "zebra", so class 0 pixels are ~50.
        let first_class0 = ds
            .y_train
            .iter()
            .position(|&y| y == 0)
            .expect("class 0 in train split");
        assert!(ds.x_train[first_class0 * 4] < 100);
    }
}
