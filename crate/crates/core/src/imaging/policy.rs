use serde::{Deserialize, Serialize};

use super::{crop, fit_square, Image, ImagingError};

pub const FIVE_CROP: &str = "5C";
pub const TEN_CROP: &str = "10C";

const PAPER_SOURCE_SIDE: usize = 256;
const PAPER_VIEW_SIDE: usize = 224;

/// One augmented view: a crop rectangle on the square source plus an
/// optional left-to-right flip applied after cropping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub hflip: bool,
}

impl ViewSpec {
    pub const fn new(x: usize, y: usize, width: usize, height: usize, hflip: bool) -> Self {
        Self {
            x,
            y,
            width,
            height,
            hflip,
        }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x.checked_add(self.width).is_some_and(|r| r <= width)
            && self.y.checked_add(self.height).is_some_and(|b| b <= height)
    }

    pub fn flipped(self) -> Self {
        Self {
            hflip: !self.hflip,
            ..self
        }
    }
}

/// An ordered set of views. The order is the order in which the adaptive
/// executor evaluates them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformPolicy {
    name: String,
    views: Vec<ViewSpec>,
    source_side: usize,
    view_side: usize,
}

impl TransformPolicy {
    /// Builds a custom policy. Every view must lie inside a
    /// `source_side`×`source_side` source.
    pub fn new(
        name: impl Into<String>,
        views: Vec<ViewSpec>,
        source_side: usize,
        view_side: usize,
    ) -> Result<Self, ImagingError> {
        if views.is_empty() {
            return Err(ImagingError::InvalidPolicy("policy has no views".into()));
        }
        if source_side == 0 || view_side == 0 {
            return Err(ImagingError::InvalidPolicy(
                "zero source or view side".into(),
            ));
        }
        if let Some(v) = views.iter().find(|v| !v.fits(source_side, source_side)) {
            return Err(ImagingError::InvalidPolicy(format!(
                "view {v:?} exceeds the {source_side}x{source_side} source"
            )));
        }
        Ok(Self {
            name: name.into(),
            views,
            source_side,
            view_side,
        })
    }

    /// Center crop followed by the four corners (top-left, top-right,
    /// bottom-left, bottom-right).
    pub fn five_crop(source_side: usize, view_side: usize) -> Result<Self, ImagingError> {
        let views = five_crop_views(source_side, view_side)?;
        Self::new(FIVE_CROP, views, source_side, view_side)
    }

    /// The five crops, then the same five mirrored.
    pub fn ten_crop(source_side: usize, view_side: usize) -> Result<Self, ImagingError> {
        let mut views = five_crop_views(source_side, view_side)?;
        views.extend(views.clone().into_iter().map(ViewSpec::flipped));
        Self::new(TEN_CROP, views, source_side, view_side)
    }

    /// Looks up a named policy at the standard 256 → 224 geometry.
    pub fn by_name(name: &str) -> Result<Self, ImagingError> {
        match name {
            FIVE_CROP => Self::five_crop(PAPER_SOURCE_SIDE, PAPER_VIEW_SIDE),
            TEN_CROP => Self::ten_crop(PAPER_SOURCE_SIDE, PAPER_VIEW_SIDE),
            other => Err(ImagingError::UnknownPolicy(other.to_string())),
        }
    }

    /// A single center-crop view, the no-augmentation preprocessing.
    pub fn center_only(&self) -> Self {
        let margin = self.source_side.saturating_sub(self.view_side) / 2;
        Self {
            name: format!("{}-center", self.name),
            views: vec![ViewSpec::new(
                margin,
                margin,
                self.view_side,
                self.view_side,
                false,
            )],
            source_side: self.source_side,
            view_side: self.view_side,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn views(&self) -> &[ViewSpec] {
        &self.views
    }

    /// Number of views, N.
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn source_side(&self) -> usize {
        self.source_side
    }

    pub fn view_side(&self) -> usize {
        self.view_side
    }

    /// Resizes (and, for non-square inputs, center-crops) an arbitrary image
    /// to the square source the views are defined on.
    pub fn prepare_source(&self, img: &Image) -> Result<Image, ImagingError> {
        fit_square(img, self.source_side)
    }

    /// Materializes view `index` from an already prepared source.
    pub fn view(&self, source: &Image, index: usize) -> Result<Image, ImagingError> {
        let spec = self.views.get(index).ok_or_else(|| {
            ImagingError::InvalidPolicy(format!(
                "view index {index} out of range 0..{}",
                self.len()
            ))
        })?;
        crop(source, spec)
    }
}

fn five_crop_views(source_side: usize, view_side: usize) -> Result<Vec<ViewSpec>, ImagingError> {
    if view_side == 0 || view_side > source_side {
        return Err(ImagingError::InvalidPolicy(format!(
            "view side {view_side} does not fit in source side {source_side}"
        )));
    }
    let far = source_side - view_side;
    let mid = far / 2;
    let s = view_side;
    Ok(vec![
        ViewSpec::new(mid, mid, s, s, false),
        ViewSpec::new(0, 0, s, s, false),
        ViewSpec::new(far, 0, s, s, false),
        ViewSpec::new(0, far, s, s, false),
        ViewSpec::new(far, far, s, s, false),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_crop_geometry() {
        let p = TransformPolicy::by_name("5C").unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.views()[0], ViewSpec::new(16, 16, 224, 224, false));
        let offsets: Vec<_> = p.views().iter().map(|v| (v.x, v.y)).collect();
        assert_eq!(offsets, vec![(16, 16), (0, 0), (32, 0), (0, 32), (32, 32)]);
        assert!(p.views().iter().all(|v| !v.hflip));
    }

    #[test]
    fn ten_crop_appends_flipped_copies() {
        let p = TransformPolicy::by_name("10C").unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.views()[5], ViewSpec::new(16, 16, 224, 224, true));
        for i in 0..5 {
            assert_eq!(p.views()[i + 5], p.views()[i].flipped());
            assert!(!p.views()[i].hflip);
        }
    }

    #[test]
    fn unknown_policy() {
        assert_eq!(
            TransformPolicy::by_name("3C"),
            Err(ImagingError::UnknownPolicy("3C".into()))
        );
    }

    #[test]
    fn custom_policy_validation() {
        assert!(TransformPolicy::new("empty", vec![], 8, 4).is_err());
        assert!(TransformPolicy::new("big", vec![ViewSpec::new(5, 0, 4, 4, false)], 8, 4).is_err());
        let p = TransformPolicy::new("one", vec![ViewSpec::new(2, 2, 4, 4, true)], 8, 4).unwrap();
        assert_eq!(p.len(), 1);
        assert!(TransformPolicy::five_crop(8, 9).is_err());
    }

    #[test]
    fn views_of_a_256_source_are_224() {
        let src = Image::from_fn(256, 256, |x, y, c| (x + y + c) as u8).unwrap();
        let p = TransformPolicy::by_name("10C").unwrap();
        for i in 0..p.len() {
            let v = p.view(&src, i).unwrap();
            assert_eq!((v.width(), v.height()), (224, 224));
        }
        assert!(p.view(&src, 10).is_err());
    }

    #[test]
    fn center_only_matches_first_view() {
        let p = TransformPolicy::by_name("10C").unwrap();
        let c = p.center_only();
        assert_eq!(c.views(), &p.views()[..1]);
    }
}
