#pragma once

// The `visage` command-line tool. `run` is kept separate from main() so the
// test suite can drive every subcommand in-process.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "visage/visage.hpp"
#include "visage/fixtures.hpp"

namespace visage::cli {

/// 1 for input/parse/validation failures, 2 for asset or geometry mismatches.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::TopologyMismatch:
    case ErrorCode::MissingLandmark:
    case ErrorCode::MissingTarget:
    case ErrorCode::UnknownTargetId:
    case ErrorCode::UninvertibleWVP:
    case ErrorCode::ProjectiveDivideByZero:
    case ErrorCode::GazeOutOfRange:
      return 2;
    default:
      return 1;
  }
}

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::string read_input(const std::string& path, std::istream& in) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(in), {});
  return text::read_file(path);
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") out << content;
  else text::write_file(path, content);
}

inline Vec3 parse_point3(const std::string& s) {
  const auto toks = text::tokens(s);
  if (toks.size() != 3) throw Error(ErrorCode::MalformedLine, "expected x,y,z but got '" + s + "'");
  Vec3 p;
  for (int i = 0; i < 3; ++i) {
    const auto v = text::parse_double(toks[i]);
    if (!v) throw Error(ErrorCode::MalformedLine, "non-numeric coordinate in '" + s + "'");
    p[i] = *v;
  }
  return p;
}

inline std::string flags(std::initializer_list<std::pair<bool, const char*>> items) {
  std::string out;
  for (const auto& [on, name] : items) {
    if (!on) continue;
    if (!out.empty()) out += '+';
    out += name;
  }
  return out.empty() ? "-" : out;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"visage: facial animation synthesis and projection calibration", "visage"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<double> fps;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON engine configuration");
  app.add_option("--fps", fps, "Frame rate (overrides the config)");
  app.add_option("--seed", seed, "Seed for noise fixtures");

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "Transcript (+ emotion script) to a frame timeline");
  std::string transcript_path, emotions_path, look_path, output_path, mesh_dir, morphset_path, track_path;
  std::string viseme_table_path, compat_table_path, kernel_name;
  std::optional<double> bandwidth;
  bool basic = false;
  syn->add_option("transcript", transcript_path, "Transcript file, '-' for stdin")->required();
  syn->add_option("-e,--emotions", emotions_path, "Emotion script");
  syn->add_option("--look", look_path, "Gaze/neck command script");
  syn->add_option("-o,--output", output_path, "Timeline output (default stdout)");
  syn->add_option("--track", track_path, "Also write the raw viseme track");
  syn->add_option("--export-mesh", mesh_dir, "Write one OBJ per frame into this directory");
  syn->add_option("--morphset", morphset_path, "Morph-set manifest for --export-mesh");
  syn->add_option("--viseme-table", viseme_table_path, "Viseme table CSV");
  syn->add_option("--compat-table", compat_table_path, "Compatibility table CSV");
  syn->add_option("--kernel", kernel_name, "gaussian or triangular")->check(CLI::IsMember({"gaussian", "triangular"}));
  syn->add_option("--bandwidth", bandwidth, "Kernel bandwidth in seconds");
  syn->add_flag("--basic-lipsync", basic, "No smoothing and no closure enforcement");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Mask corner correspondences to a piecewise map");
  std::string corr_path, map_out, pattern_out, mold_pairs_path, placement_out;
  int rows = 0, cols = 0;
  double width = 0.0, height = 0.0;
  std::string mode_name = "homography";
  cal->add_option("correspondences", corr_path, "CSV row,col,mask_x,mask_y")->required();
  cal->add_option("--rows", rows, "Checkerboard rows")->required();
  cal->add_option("--cols", cols, "Checkerboard columns")->required();
  cal->add_option("--width", width, "Screen width in pixels")->required();
  cal->add_option("--height", height, "Screen height in pixels")->required();
  cal->add_option("--mode", mode_name, "homography or triangle")->check(CLI::IsMember({"homography", "triangle"}));
  cal->add_option("-o,--output", map_out, "Map file (default stdout)");
  cal->add_option("--pattern", pattern_out, "Also write the checkerboard as PGM");
  cal->add_option("--mold-pairs", mold_pairs_path, "CSV mold_x,mold_y,mask_x,mask_y for the affine placement");
  cal->add_option("--placement-out", placement_out, "Where to write the fitted placement");

  // predistort
  auto* pre = app.add_subcommand("predistort", "Pre-distort a neutral model through a calibration");
  std::string model_path, matrices_path, map_path, placement_path, model_out;
  pre->add_option("model", model_path, "Neutral OBJ")->required();
  pre->add_option("--matrices", matrices_path, "World, view, projection: 48 numbers")->required();
  pre->add_option("--map", map_path, "Piecewise map file")->required();
  pre->add_option("--placement", placement_path, "Mold placement (6 numbers); identity if absent");
  pre->add_option("-o,--output", model_out, "Output OBJ (default stdout)");

  // gaze
  auto* gaze = app.add_subcommand("gaze", "Eye and neck commands toward 3D targets");
  std::string targets_path, origin_text = "0,0,0", gaze_out, gaze_mode = "eyes";
  gaze->add_option("targets", targets_path, "Rows x,y,z")->required();
  gaze->add_option("--origin", origin_text, "Head/eye origin x,y,z");
  gaze->add_option("--mode", gaze_mode, "eyes, or head for gaze plus head movement")
      ->check(CLI::IsMember({"eyes", "head"}));
  gaze->add_option("-o,--output", gaze_out, "Output CSV (default stdout)");

  // fixtures
  auto* fix = app.add_subcommand("fixtures", "Write the procedural test head and calibration fixtures");
  std::string fixture_dir;
  double noise = 0.0;
  fix->add_option("dir", fixture_dir, "Output directory")->required();
  fix->add_option("--noise", noise, "Gaussian noise (pixels) on the warped corners");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "visage: error: usage: " << e.what() << "\n";
    return 1;
  }

  try {
    EngineConfig cfg;
    if (!config_path.empty()) {
      cfg = parse_config(text::read_file(config_path), std::filesystem::path(config_path).parent_path().string());
    }
    if (fps) cfg.fps = *fps;

    if (*syn) {
      if (!kernel_name.empty()) cfg.kernel.shape = kernel_name == "gaussian" ? KernelShape::gaussian : KernelShape::triangular;
      if (bandwidth) cfg.kernel.bandwidth = *bandwidth;
      if (basic) cfg.use_basic_lipsync();
      if (!viseme_table_path.empty()) cfg.viseme_table = viseme_table_path;
      if (!compat_table_path.empty()) cfg.compat_table = compat_table_path;
      if (!morphset_path.empty()) cfg.morphset = morphset_path;
      cfg.validate();

      const auto visemes = cfg.viseme_table.empty() ? VisemeTable::english()
                                                    : VisemeTable::parse(text::read_file(cfg.viseme_table));
      const auto compat = cfg.compat_table.empty() ? CompatibilityTable::defaults()
                                                   : CompatibilityTable::parse(text::read_file(cfg.compat_table));
      const auto transcript = parse_transcript(detail::read_input(transcript_path, io.in), visemes);
      const auto emotions = emotions_path.empty()
                                ? std::vector<ExpressionSpec>{}
                                : parse_emotion_script(text::read_file(emotions_path), cfg.envelope);
      const auto look = look_path.empty() ? LookScript{} : parse_look_script(text::read_file(look_path));

      std::optional<MorphSet> morphs;
      if (!mesh_dir.empty()) {
        if (cfg.morphset.empty()) throw Error(ErrorCode::MissingTarget, "--export-mesh needs --morphset");
        try {
          morphs = load_morphset(cfg.morphset);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Io && e.code() != ErrorCode::MalformedLine) throw;
          throw Error(ErrorCode::TopologyMismatch, std::string("cannot load morph set: ") + e.what());
        }
        for (int id : compat.preblend_ids()) {
          if (!morphs->find({TargetKind::preblend, id})) {
            throw Error(ErrorCode::MissingTarget, "compatibility table references pre-blend " + std::to_string(id) +
                                                      " absent from the morph set");
          }
        }
      }

      const auto timeline = synthesize(transcript, emotions, visemes, compat, cfg, look);
      detail::emit(output_path, serialize_timeline(timeline), io.out);
      if (!track_path.empty() && !timeline.frames.empty()) {
        text::write_file(track_path, serialize_track(synthesize_track(transcript, visemes, cfg)));
      }
      if (morphs) {
        std::filesystem::create_directories(mesh_dir);
        for (std::size_t k = 0; k < timeline.frames.size(); ++k) {
          const auto& fb = timeline.frames[k];
          const auto mesh = apply_gaze(blend_mesh(*morphs, fb), *morphs, fb.gaze.yaw, fb.gaze.pitch);
          char name[32];
          std::snprintf(name, sizeof name, "frame_%05zu.obj", k);
          text::write_file((std::filesystem::path(mesh_dir) / name).string(), serialize_obj(mesh));
        }
      }
      return 0;
    }

    if (*cal) {
      const auto board = gen_checkerboard(rows, cols, width, height);
      const auto mask = parse_correspondences(text::read_file(corr_path), rows, cols);
      const auto map = build_piecewise_map(board.grid, mask,
                                           mode_name == "homography" ? CellMode::homography : CellMode::triangle_affine);
      detail::emit(map_out, serialize_piecewise_map(map), io.out);
      if (!pattern_out.empty()) text::write_file(pattern_out, render_pgm(board));
      if (!mold_pairs_path.empty()) {
        const auto fit = fit_affine_mold(parse_point_pairs(text::read_file(mold_pairs_path)));
        io.err << "placement residual rms=" << text::format_double(fit.rms)
               << " max=" << text::format_double(fit.max) << "\n";
        if (!placement_out.empty()) text::write_file(placement_out, serialize_placement(fit.placement));
      }
      return 0;
    }

    if (*pre) {
      const auto mesh = parse_obj(text::read_file(model_path));
      const auto cams = parse_camera_matrices(text::read_file(matrices_path));
      const auto map = parse_piecewise_map(text::read_file(map_path));
      const auto placement = placement_path.empty() ? MoldPlacement{} : parse_placement(text::read_file(placement_path));
      detail::emit(model_out, serialize_obj(predistort_model(mesh, cams, map, placement)), io.out);
      return 0;
    }

    if (*gaze) {
      const Vec3 origin = detail::parse_point3(origin_text);
      const bool head = gaze_mode == "head";
      std::string out;
      std::size_t line_no = 0;
      std::size_t index = 0;
      const std::string targets = text::read_file(targets_path);
      for (auto line : text::lines(targets)) {
        ++line_no;
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.front() == '#' || std::isalpha(static_cast<unsigned char>(trimmed.front()))) continue;
        const Vec3 target = detail::parse_point3(std::string(trimmed));
        const auto row = index++;
        AimAngles aim;
        try {
          aim = aim_angles(origin, target);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateTarget) throw;
          io.err << "visage: warning: DegenerateTarget at line " << line_no << ": target skipped\n";
          continue;
        }
        ClampedPose neck;
        if (head) neck = clamp_neck(aim.yaw, aim.pitch, 0.0);
        const double eye_yaw = aim.yaw - neck.pose.yaw;
        const double eye_pitch = aim.pitch - neck.pose.pitch;
        const double cy = std::clamp(eye_yaw, -kMaxGazeYaw, kMaxGazeYaw);
        const double cp = std::clamp(eye_pitch, -kMaxGazePitch, kMaxGazePitch);
        if (out.empty()) out = "target,eye_yaw,eye_pitch,neck_yaw,neck_pitch,neck_roll,clamped\n";
        out += std::to_string(row) + "," + text::format_double(cy) + "," + text::format_double(cp) + "," +
               text::format_double(neck.pose.yaw) + "," + text::format_double(neck.pose.pitch) + "," +
               text::format_double(neck.pose.roll) + "," +
               detail::flags({{neck.yaw_clamped, "neck_yaw"},
                              {neck.pitch_clamped, "neck_pitch"},
                              {cy != eye_yaw, "eye_yaw"},
                              {cp != eye_pitch, "eye_pitch"}}) +
               "\n";
      }
      detail::emit(gaze_out, out, io.out);
      return 0;
    }

    if (*fix) {
      const std::filesystem::path dir(fixture_dir);
      const auto head = fixtures::make_procedural_head();
      fixtures::write_head(head, dir / "head");
      text::write_file((dir / "camera.txt").string(), serialize_camera_matrices(fixtures::default_camera()));
      const ScreenGrid grid{4, 4, 800.0, 600.0};
      const auto board = gen_checkerboard(grid.rows, grid.cols, grid.width, grid.height);
      text::write_file((dir / "identity_corners.csv").string(), serialize_correspondences(grid, board.corners));
      auto warped = fixtures::warp_corners(grid, fixtures::SmoothWarp{grid.width, grid.height, 12.0});
      if (noise > 0.0) warped = fixtures::add_noise(std::move(warped), noise, seed);
      text::write_file((dir / "warp_corners.csv").string(), serialize_correspondences(grid, warped));
      text::write_file((dir / "placement_identity.txt").string(), serialize_placement(MoldPlacement{}));
      return 0;
    }
  } catch (const Error& e) {
    io.err << "visage: error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    io.err << "visage: error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace visage::cli
