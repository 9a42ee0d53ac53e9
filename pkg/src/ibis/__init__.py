"""Wi-Fi CSI activity-recognition toolkit.

Pipeline: synthetic (or converted) CSI datasets -> phase sanitization ->
Doppler velocity traces -> hybrid Inception/BiLSTM classifier -> SVM
decision refinement -> multi-antenna majority-vote fusion, with bandwidth
sub-band extraction for 20/40/80 MHz comparisons.
"""

from .csi import (ActivityLabel, CsiDataset, CsiFrame, CsiRecording, CsiSample,
                  SubcarrierLayout, default_layout, extract_subband,
                  extract_subband_dataset)
from .csif import (inspect_csif, iter_csif_samples, parse_csif, parse_csif_file,
                   write_csif, write_csif_file)
from .doppler import (DopplerConfig, DopplerTrace, StftConfig, doppler_frequency,
                      doppler_trace, normalize_trace, parse_dopp, parse_dopp_file,
                      stft, write_dopp, write_dopp_file)
from .sanitize import (LassoFit, PhaseMatrix, lasso_fit, raw_phase_matrix,
                       sanitize_recording, unwrap_phase)
from .synth import (ActivityScript, ConstantVelocity, MultipathComponent,
                    SinusoidalVelocity, SynthConfig, csi_at, default_scripts,
                    generate_dataset, iter_synthetic_samples)

__version__ = "0.1.0"
