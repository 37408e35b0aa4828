// SPDX-License-Identifier: Apache-2.0
//
// One synthetic video through the whole pipeline with a custom predictor.

#include <iostream>

#include "mrkit/mrkit.hpp"

int main() {
  mrkit::SyntheticSpec spec;
  spec.n_frames = 60;
  spec.duration = 30.0;
  spec.noise_std = 0.01;
  spec.seed = 42;
  spec.segments = {{0, 20, 0.0, false}, {20, 36, 2.5, true}, {36, 60, 0.5, false}};
  auto video = mrkit::generate_synthetic(spec);

  // Any callable works as the predictor; this one answers in frame indices.
  mrkit::MomentPredictor predictor = [](const mrkit::PredictionContext&) {
    return "[[21, 37]]</s>";
  };

  mrkit::PipelineConfig cfg;
  auto result = mrkit::run_pipeline(video.frames, video.record, video.plan, cfg, predictor);

  std::cout << "scheme: " << mrkit::to_string(result.scheme.kind) << "\n"
            << "tokens after compression: " << result.total_tokens << "\n"
            << "parsed: " << mrkit::render(result.parsed) << "\n"
            << "moment: [" << result.pair.predictions[0].start << ", " << result.pair.predictions[0].end << "] s\n"
            << "ground truth: [" << video.record.ground_truth[0].start << ", " << video.record.ground_truth[0].end
            << "] s\n"
            << "IoU: " << mrkit::temporal_iou(result.pair.predictions[0], video.record.ground_truth[0]) << "\n";
}
