//! Evaluation: informativity classifiers, template-contrast significance,
//! epoch-series post-processing, and report emission.

mod classifier;
mod contrast;
mod metrics;
mod report;

pub use classifier::{
    assemble_dataset, classify, informativity_rate, load_classifier, nll_loss, save_classifier,
    train_informativity_classifier, translate_sounds, ClassifierConfig, InformativityDataset,
    LabeledImage, RateReport, TrainedClassifier,
};
pub use contrast::{template_contrast, ContrastResult};
pub use metrics::{epoch_metrics, range_average, MaskRule, MetricSeries};
pub use report::{emit_report, svg_lines, DimensionReport};

use crate::error::{S2iError, S2iResult};

/// Manual annotation vocabulary for non-informative translations, ordered
/// from least to most structured failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TranslationLabel {
    Defective,
    Incomplete,
    Artifactual,
    Implausible,
    Surreal,
    Creepy,
    /// Readable as more than one class at once.
    MultiInformative,
}

impl TranslationLabel {
    pub const ALL: [TranslationLabel; 7] = [
        TranslationLabel::Defective,
        TranslationLabel::Incomplete,
        TranslationLabel::Artifactual,
        TranslationLabel::Implausible,
        TranslationLabel::Surreal,
        TranslationLabel::Creepy,
        TranslationLabel::MultiInformative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TranslationLabel::Defective => "defective",
            TranslationLabel::Incomplete => "incomplete",
            TranslationLabel::Artifactual => "artifactual",
            TranslationLabel::Implausible => "implausible",
            TranslationLabel::Surreal => "surreal",
            TranslationLabel::Creepy => "creepy",
            TranslationLabel::MultiInformative => "multi_informative",
        }
    }

    pub fn parse(s: &str) -> S2iResult<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| S2iError::Data(format!("unknown translation label {s:?}")))
    }
}

/// Tallies annotation labels into CSV rows "label,count" covering the whole
/// vocabulary, fixed order.
pub fn label_histogram_csv(labels: &[TranslationLabel]) -> String {
    let mut out = String::from("label,count\n");
    for l in TranslationLabel::ALL {
        let count = labels.iter().filter(|&&x| x == l).count();
        out.push_str(&format!("{},{}\n", l.as_str(), count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_through_strings() {
        for l in TranslationLabel::ALL {
            assert_eq!(TranslationLabel::parse(l.as_str()).unwrap(), l);
        }
        assert!(TranslationLabel::parse("blurry").is_err());
    }

    #[test]
    fn histogram_covers_whole_vocabulary() {
        let labels = [
            TranslationLabel::Creepy,
            TranslationLabel::Creepy,
            TranslationLabel::Surreal,
        ];
        let csv = label_histogram_csv(&labels);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], "label,count");
        assert!(lines.contains(&"creepy,2"));
        assert!(lines.contains(&"surreal,1"));
        assert!(lines.contains(&"defective,0"));
    }
}
