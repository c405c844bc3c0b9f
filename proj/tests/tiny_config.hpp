// Reduced-size reader configurations shared by the reader, pipeline, and
// acceptance suites.
#pragma once

#include "storyq/pipeline.hpp"

namespace testutil {

inline storyq::ReaderConfig tiny_reader_config() { return storyq::reduced_reader_config(); }

// experiment config over the tiny reader geometry
inline storyq::ExperimentConfig tiny_experiment(storyq::ModelKind kind, uint64_t seed) {
  storyq::ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.reader = tiny_reader_config();
  cfg.seed = seed;
  if (kind == storyq::ModelKind::rnn_a || kind == storyq::ModelKind::lstm_a) cfg.clip_norm = 1.0;
  return cfg;
}

}  // namespace testutil
