"""Cross-modal multi-granularity knowledge distillation workbench.

A pre-trained audio-side sequence recognizer (teacher) guides the training
of a video-side recognizer (student) at three feature granularities, with a
synthetic paired-modality corpus for desk-scale experiments.
"""

from .align import EquivRelation, LcsMatch, class_equiv, lcs_match
from .distill import (AffineMap, DistillParams, KDWeights, LossBreakdown,
                      TeacherArtifacts, align_frames, compute_teacher_artifacts,
                      init_distill_params, loss_kd1, loss_kd2, loss_kd3, total_loss)
from .errors import (ConfigError, ContractError, DomainError, FormatError,
                     ShapeError)
from .metrics import (ErrorRateReport, bleu_unigram, corpus_error_rate,
                      edit_distance, error_rate)
from .seq2seq import (AttnParams, DecoderTrace, EncoderOutput, GruParams,
                      Hypothesis, ModelConfig, Seq2Seq, Vocab, attention_context,
                      attention_score, beam_search, decode_teacher_forced, encode,
                      greedy_decode, gru_cell, init_gru_params)
from .synthdata import (Corpus, GenConfig, PairedSample, gen_corpus, load_corpus,
                        save_corpus)
from .tensor import Tensor, backward, no_grad

__version__ = "0.1.0"
