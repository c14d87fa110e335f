// Synthesizes a short "mama" utterance with a joy ramp and prints the
// dominant viseme and joy weights per frame.

#include <cstdio>

#include "visage/visage.hpp"

int main() {
  using namespace visage;
  const auto& visemes = VisemeTable::english();
  const auto transcript = parse_transcript(
      "sil\t0\t100\nm\t100\t105\nɑ\t105\t300\nm\t300\t305\nɑ\t305\t500\n", visemes);

  ExpressionSpec joy{Expression::joy, 0.8, Envelope{{{0.0, 0.0}, {0.3, 1.0}, {0.5, 1.0}}}};
  const auto timeline =
      synthesize(transcript, std::span(&joy, 1), visemes, CompatibilityTable::defaults(), EngineConfig{});

  std::printf("frame  time   dominant          joy(upper/lower)\n");
  for (std::size_t k = 0; k < timeline.frames.size(); ++k) {
    const auto& fb = timeline.frames[k];
    const int d = dominant_viseme(fb.viseme_weights);
    std::printf("%5zu  %.3f  %-16s  %.2f / %.2f\n", k, timeline.frame_time(k), visemes.at(d).name.c_str(),
                fb.upper[index_of(Expression::joy)], fb.lower[index_of(Expression::joy)]);
  }
}
