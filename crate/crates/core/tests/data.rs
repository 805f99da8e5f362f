use ldainit::data::{
    generate_synthetic, load_page, load_split, page_from_fn, write_synthetic_dataset, PageSet,
    PatchSampler, Split, CLASS_COUNT,
};
use ldainit::network::{scale_pixel, SampleSource};
use ldainit::Error;

#[test]
fn single_white_pixel_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let page = page_from_fn(1, 1, 4, |_, _| ([255, 255, 255], 0)).unwrap();
    let (img, lbl) = (dir.path().join("a.png"), dir.path().join("a_gt.png"));
    page.save(&img, &lbl).unwrap();
    let back = load_page(&img, &lbl, 4).unwrap();
    assert_eq!(back.truth.labels, vec![0]);
    assert_eq!(back.image.get_pixel(0, 0).0, [255, 255, 255]);
}

#[test]
fn synthetic_page_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let set = generate_synthetic(3, 1, 96, 128).unwrap();
    let page = &set.pages[0];
    let (img, lbl) = (dir.path().join("p.png"), dir.path().join("p_gt.png"));
    page.save(&img, &lbl).unwrap();
    let back = load_page(&img, &lbl, CLASS_COUNT).unwrap();
    assert_eq!(back.truth.labels, page.truth.labels);
    assert_eq!(back.image, page.image);
}

#[test]
fn out_of_range_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("p.png"), dir.path().join("p_gt.png"));
    image::RgbImage::new(2, 2).save(&img).unwrap();
    image::GrayImage::from_raw(2, 2, vec![0, 1, 7, 3]).unwrap().save(&lbl).unwrap();
    let err = load_page(&img, &lbl, 4).unwrap_err();
    assert!(matches!(err, Error::LabelRange { label: 7, class_count: 4 }));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("p.png"), dir.path().join("p_gt.png"));
    image::RgbImage::new(2, 2).save(&img).unwrap();
    image::GrayImage::new(3, 2).save(&lbl).unwrap();
    assert!(matches!(load_page(&img, &lbl, 4), Err(Error::Data(_))));
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_page(&dir.path().join("nope.png"), &dir.path().join("nope_gt.png"), 4);
    assert!(err.is_err());
}

#[test]
fn constant_page_gives_constant_patches() {
    let page = page_from_fn(40, 40, 2, |x, _| ([128, 128, 128], u8::from(x >= 20))).unwrap();
    let set = PageSet::new(Split::Train, 2, vec![page]).unwrap();
    let sampler = PatchSampler::new(&set, 23, 23, true).unwrap();
    let expected: f64 = 128.0 / 127.5 - 1.0;
    assert!((expected - 0.0039).abs() < 1e-4);
    for s in sampler.sample_patches(1, 50).unwrap() {
        assert_eq!(s.patch.len(), 23 * 23 * 3);
        assert!(s.patch.iter().all(|&v| v == expected));
    }
}

#[test]
fn sampling_is_deterministic() {
    let set = generate_synthetic(9, 2, 96, 96).unwrap();
    let sampler = PatchSampler::new(&set, 23, 23, true).unwrap();
    let a = sampler.draw(42, 100).unwrap();
    let b = sampler.draw(42, 100).unwrap();
    let c = sampler.draw(43, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn balanced_counts_are_exact() {
    let set = generate_synthetic(1, 3, 160, 160).unwrap();
    let sampler = PatchSampler::new(&set, 23, 23, true).unwrap();
    let mut counts = [0usize; CLASS_COUNT];
    for s in sampler.sample_patches(5, 4000).unwrap() {
        counts[s.label] += 1;
    }
    assert_eq!(counts, [1000; CLASS_COUNT]);

    let mut counts = [0usize; CLASS_COUNT];
    for s in sampler.sample_patches(5, 4002).unwrap() {
        counts[s.label] += 1;
    }
    assert_eq!(counts, [1001, 1001, 1000, 1000]);
}

#[test]
fn patch_label_matches_centre_pixel() {
    // Encode the coordinates in the pixel values so the centre is recoverable.
    let page = page_from_fn(64, 64, 4, |x, y| {
        ([x as u8, y as u8, 0], ((x / 8 + y / 8) % 4) as u8)
    })
    .unwrap();
    let truth = page.truth.clone();
    let set = PageSet::new(Split::Train, 4, vec![page]).unwrap();
    for balanced in [true, false] {
        let sampler = PatchSampler::new(&set, 23, 23, balanced).unwrap();
        for s in sampler.sample_patches(7, 300).unwrap() {
            let centre = (11 * 23 + 11) * 3;
            let x = ((s.patch[centre] + 1.0) * 127.5).round() as u32;
            let y = ((s.patch[centre + 1] + 1.0) * 127.5).round() as u32;
            assert!((11..=52).contains(&x) && (11..=52).contains(&y));
            assert_eq!(truth.get(x, y) as usize, s.label);
            assert_eq!(s.patch[0], scale_pixel((x - 11) as u8));
        }
    }
}

#[test]
fn generator_is_deterministic() {
    let a = generate_synthetic(77, 2, 120, 100).unwrap();
    let b = generate_synthetic(77, 2, 120, 100).unwrap();
    let c = generate_synthetic(78, 2, 120, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.pages[0].image, c.pages[0].image);
}

#[test]
fn generator_class_shares() {
    for (w, h) in [(480, 640), (160, 200), (64, 64), (240, 320)] {
        let set = generate_synthetic(2024, 6, w, h).unwrap();
        for page in &set.pages {
            let hist = page.truth.class_histogram();
            let total = (w * h) as f64;
            let shares: Vec<f64> = hist.iter().map(|&c| c as f64 / total).collect();
            assert!((0.5..=0.9).contains(&shares[0]), "{w}x{h} background {shares:?}");
            for (c, &s) in shares.iter().enumerate().skip(1) {
                assert!((0.01..=0.3).contains(&s), "{w}x{h} class {c}: {shares:?}");
            }
        }
    }
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_synthetic_dataset(dir.path(), 4, 6, 96, 96).unwrap();
    let train = load_split(&path, Split::Train).unwrap();
    let val = load_split(&path, Split::Validation).unwrap();
    let test = load_split(&path, Split::Test).unwrap();
    assert_eq!((train.pages.len(), val.pages.len(), test.pages.len()), (4, 1, 1));
    let regenerated = generate_synthetic(4, 6, 96, 96).unwrap();
    assert_eq!(train.pages[0].truth.labels, regenerated.pages[0].truth.labels);
    assert_eq!(test.pages[0].image, regenerated.pages[5].image);
}
