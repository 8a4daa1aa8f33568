"""RF fingerprinting toolkit: wavelet, scattering and Hilbert-Huang features,
an SDAE-LOF novelty detector and a hierarchical device identifier."""
from .anomaly import LofModel, calibrate_threshold, lof_classify, lof_fit, lof_score, lof_scores
from .compress import (PcaModel, SdaeModel, TrainConfig, pca_fit, pca_inverse, pca_transform,
                       sdae_encode, sdae_reconstruct, sdae_train)
from .errors import DegenerateDataError, FormatError, InvalidInputError, RffpError
from .features import FeatureVector, assemble_hht_wpt, stat_summary, wpt_features
from .hht import EmdConfig, emd, hht_features, hilbert_analytic
from .hierarchy import (KnnClassifier, LabelTree, PredictionPath, flat_metrics, hc_predict, hc_train,
                        hier_metrics, knn_fit, knn_predict, read_tree)
from .signal import (BurstSegment, DeviceSpec, Signal, add_awgn, detect_bursts, minmax_denormalize,
                     minmax_normalize, slice_steady, synth_generate)
from .wavelet import (CwtConfig, WstConfig, cwt, cwt_avg_features, haar_dwt, haar_idwt, render_scalogram,
                      scalogram_energy, wpt_two_level, wst, wst_avg_features)

__version__ = "0.1.0"
