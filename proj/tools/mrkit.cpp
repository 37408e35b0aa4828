// SPDX-License-Identifier: Apache-2.0
//
// mrkit command-line front end. Exit codes: 0 success, 1 input error,
// 2 internal invariant violation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mrkit/mrkit.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kInputError = 1;
constexpr int kInvariantError = 2;

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) mrkit::fail(mrkit::Errc::io_failure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) mrkit::fail(mrkit::Errc::io_failure, "write failed: " + path.string());
}

std::vector<std::size_t> json_indices(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    mrkit::fail(mrkit::Errc::missing_field, std::string("split file lacks '") + key + "'");
  return it->get<std::vector<std::size_t>>();
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) mrkit::fail(mrkit::Errc::io_failure, "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) mrkit::fail(mrkit::Errc::malformed_record, path.string() + ": not valid JSON");
  return j;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string input, out, keys_out, nonkeys_out;
  std::size_t k = 32;
  double sigma = mrkit::kDefaultSigma;
};

void run_select(const SelectArgs& a) {
  auto frames = mrkit::load_frame_tensor(a.input);
  auto r = mrkit::run_ifs(frames, a.sigma, a.k);
  ordered_json j;
  j["k"] = r.split.k;
  j["sigma"] = a.sigma;
  j["key_indices"] = r.split.key_indices;
  j["nonkey_indices"] = r.split.nonkey_indices;
  j["raw"] = r.profile.raw;
  j["smoothed"] = r.profile.smoothed;
  write_text(a.out, j.dump(2) + "\n");
  if (!a.keys_out.empty()) mrkit::save_tensor(*mrkit::gather_frames(frames, r.split.key_indices), a.keys_out);
  if (!a.nonkeys_out.empty()) {
    if (auto nk = mrkit::gather_frames(frames, r.split.nonkey_indices)) mrkit::save_tensor(*nk, a.nonkeys_out);
  }
}

struct ProfileArgs {
  std::string input, out;
  double sigma = mrkit::kDefaultSigma;
};

void run_profile(const ProfileArgs& a) {
  auto p = mrkit::change_profile(mrkit::load_frame_tensor(a.input), a.sigma);
  std::string csv = "frame,raw,smoothed\n";
  for (std::size_t i = 0; i < p.raw.size(); ++i)
    csv += std::to_string(i) + "," + mrkit::format_number(p.raw[i]) + "," + mrkit::format_number(p.smoothed[i]) + "\n";
  write_text(a.out, csv);
}

struct CompressArgs {
  std::string keys, nonkeys, split, method = "variance", out;
  std::size_t target_tokens = 16, pool_window = 2, lang_dim = 0;
  std::uint64_t projector_seed = 11;
};

void run_compress(const CompressArgs& a) {
  auto key = mrkit::load_query_tensor(a.keys);
  std::optional<mrkit::QueryTensor> nonkey;
  if (!a.nonkeys.empty()) nonkey = mrkit::load_query_tensor(a.nonkeys);
  const std::size_t nk = nonkey ? nonkey->n_frames() : 0;

  mrkit::FrameSplit split;
  if (!a.split.empty()) {
    auto j = read_json(a.split);
    split.key_indices = json_indices(j, "key_indices");
    split.nonkey_indices = json_indices(j, "nonkey_indices");
  } else {
    for (std::size_t i = 0; i < key.n_frames(); ++i) split.key_indices.push_back(i);
    for (std::size_t i = 0; i < nk; ++i) split.nonkey_indices.push_back(key.n_frames() + i);
  }
  split.k = split.key_indices.size();

  mrkit::CompressionConfig cfg;
  cfg.method = mrkit::parse_compression_method(a.method);
  cfg.pool_window = a.pool_window;
  cfg.target_tokens = a.target_tokens;
  if (cfg.method == mrkit::CompressionMethod::average_pooling) {
    // Derive the window from the requested token count.
    mrkit::require(a.target_tokens >= 1, "target tokens must be >= 1");
    cfg.pool_window = (key.rows() + a.target_tokens - 1) / a.target_tokens;
  }
  auto projector = a.lang_dim == 0 || a.lang_dim == key.dim()
                       ? mrkit::Projector::identity(key.dim())
                       : mrkit::Projector::seeded_linear(key.dim(), a.lang_dim, a.projector_seed);
  auto seq = mrkit::compress_and_project(key, nonkey, split, cfg, projector);

  // Concatenated tokens as a (total_tokens x 1 x D2) tensor plus a sidecar.
  std::vector<double> flat;
  for (const auto& b : seq.per_frame) flat.insert(flat.end(), b.data.begin(), b.data.end());
  mrkit::save_tensor(mrkit::QueryTensor(seq.total_tokens(), 1, projector.out_dim(), std::move(flat)), a.out);

  ordered_json side;
  side["method"] = std::string(mrkit::to_string(cfg.method));
  side["tokens_per_frame"] = seq.tokens_per_frame();
  side["key_mask"] = seq.key_mask;
  side["total_tokens"] = seq.total_tokens();
  if (cfg.method == mrkit::CompressionMethod::variance_select) side["kept_query_indices"] = seq.kept_query_indices;
  write_text(a.out + ".json", side.dump(2) + "\n");
}

struct EncodeArgs {
  std::string records, frames, scheme = "auto", out, prompt, special = "both";
  double fps = 30.0;
};

void run_encode(const EncodeArgs& a) {
  auto records = mrkit::load_records(a.records);
  mrkit::Settings s;
  if (!a.prompt.empty()) s.pipeline.prompt = a.prompt;
  mrkit::apply_setting(s, "special-tokens", a.special);
  const auto pref = mrkit::parse_scheme_preference(a.scheme);

  // Token counts per frame: from a compress sidecar if one sits next to the
  // tensor, else every frame carries R tokens.
  auto tokens_for = [&](const fs::path& path) {
    fs::path side = path.string() + ".json";
    if (fs::exists(side)) return json_indices(read_json(side), "tokens_per_frame");
    auto t = mrkit::load_query_tensor(path);
    return std::vector<std::size_t>(t.n_frames(), t.rows());
  };

  const bool per_video = fs::is_directory(a.frames);
  std::vector<std::size_t> shared;
  if (!per_video) shared = tokens_for(a.frames);

  std::string text;
  for (const auto& r : records) {
    auto tokens = per_video ? tokens_for(fs::path(a.frames) / (r.video_id + ".mreb")) : shared;
    mrkit::LanguageSequence lang;
    for (std::size_t m : tokens) lang.per_frame.push_back({m, 0, {}});
    auto plan = mrkit::SamplingPlan::uniform(tokens.size(), r.duration);
    auto scheme = mrkit::make_scheme(plan, pref, a.fps);
    auto times = mrkit::encode_times(scheme, plan);
    text += mrkit::build_sequence(times, lang, r.query, s.pipeline.prompt, s.pipeline.special).serialize() + "\n";
  }
  write_text(a.out, text);
}

struct ParseArgs {
  std::string in, out;
};

void run_parse(const ParseArgs& a) {
  std::ifstream in(a.in);
  if (!in) mrkit::fail(mrkit::Errc::io_failure, "cannot open " + a.in);
  std::string line, text;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto parsed = mrkit::post_process(line);
    ordered_json j;
    j["line_no"] = line_no;
    j["moments"] = ordered_json::array();
    for (const auto& p : parsed.moments) j["moments"].push_back({p.start, p.end});
    j["was_fallback"] = parsed.was_fallback;
    text += j.dump() + "\n";
  }
  write_text(a.out, text);
}

struct EvalArgs {
  std::string gt, pred, r1 = "0.5,0.7", map = "0.5,0.75", protocol = "per_query", out;
};

void run_eval(const EvalArgs& a) {
  mrkit::Settings s;
  mrkit::apply_setting(s, "r1", a.r1);
  mrkit::apply_setting(s, "map", a.map);
  mrkit::apply_setting(s, "map-protocol", a.protocol);
  auto gt = mrkit::load_records(a.gt);
  auto pred = mrkit::load_predictions(a.pred);
  if (gt.empty()) mrkit::fail(mrkit::Errc::invalid_argument, "no queries");
  if (gt.size() != pred.size())
    mrkit::fail(mrkit::Errc::invalid_argument, "ground truth has " + std::to_string(gt.size()) +
                                                   " lines, predictions " + std::to_string(pred.size()));
  std::vector<mrkit::EvalPair> pairs;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].video_id != pred[i].video_id)
      mrkit::fail(mrkit::Errc::invalid_argument, "line " + std::to_string(i + 1) + ": video_id mismatch ('" +
                                                     gt[i].video_id + "' vs '" + pred[i].video_id + "')");
    std::vector<mrkit::NumberPair> raw;
    if (pred[i].pred_moments) {
      for (const auto& m : *pred[i].pred_moments) raw.push_back({m.start, m.end});
      if (raw.empty()) raw = mrkit::fallback_prediction().moments;
    } else {
      raw = mrkit::post_process(*pred[i].pred_raw).moments;
    }
    // Predicted values are seconds.
    mrkit::TimeScheme seconds{mrkit::TimeSchemeKind::rounded_timestamp, {}, 0.0};
    pairs.push_back({mrkit::decode_moments(raw, seconds, gt[i].duration), gt[i].ground_truth});
  }
  auto report = mrkit::evaluate(pairs, s.pipeline.eval);
  write_text(a.out, mrkit::report_to_json(report).dump(2) + "\n");
}

struct SuiteArgs {
  std::string config, out, timings, emit_dir, predictions_out, records, frames_dir;
  std::map<std::string, std::string> overrides;
};

mrkit::Settings settings_from(const SuiteArgs& a, CLI::App* cmd) {
  mrkit::Settings s;
  if (!a.config.empty()) mrkit::load_settings(s, a.config);
  for (const auto& [key, value] : a.overrides) {
    if (cmd->get_option("--" + key)->count() > 0) mrkit::apply_setting(s, key, value);
  }
  return s;
}

void emit_suite(const SuiteArgs& a, const mrkit::SuiteResult& r) {
  write_text(a.out, mrkit::report_to_json(r.report).dump(2) + "\n");
  if (!a.timings.empty()) write_text(a.timings, mrkit::timings_to_json(r).dump(2) + "\n");
  if (!a.predictions_out.empty()) {
    std::string text;
    for (const auto& o : r.outcomes) {
      ordered_json j;
      j["video_id"] = o.video_id;
      j["pred_raw"] = o.raw_output;
      j["pred_moments"] = ordered_json::array();
      for (const auto& m : o.moments) j["pred_moments"].push_back({m.start, m.end});
      text += j.dump() + "\n";
    }
    write_text(a.predictions_out, text);
  }
}

void run_simulate(SuiteArgs& a, CLI::App* cmd) {
  auto s = settings_from(a, cmd);
  if (!a.emit_dir.empty()) {
    fs::create_directories(fs::path(a.emit_dir) / "frames");
    std::vector<mrkit::VideoRecord> records;
    for (std::size_t i = 0; i < s.simulation.videos; ++i) {
      auto v = mrkit::generate_synthetic(mrkit::random_synthetic_spec(s.simulation, i));
      mrkit::save_frame_tensor(v.frames, fs::path(a.emit_dir) / "frames" / (v.record.video_id + ".mreb"));
      records.push_back(std::move(v.record));
    }
    mrkit::save_records(records, fs::path(a.emit_dir) / "records.jsonl");
  }
  emit_suite(a, mrkit::run_simulation(s.simulation, s.pipeline));
}

void run_suite_cmd(SuiteArgs& a, CLI::App* cmd) {
  auto s = settings_from(a, cmd);
  emit_suite(a, mrkit::run_suite(a.records, a.frames_dir, {}, s));
}

void add_setting_flags(CLI::App* cmd, SuiteArgs& a) {
  for (auto key : mrkit::kSettingKeys) {
    std::string k(key);
    cmd->add_option("--" + k, a.overrides[k], "setting '" + k + "' (overrides --config)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrkit: moment-retrieval pipeline toolkit"};
  app.require_subcommand(1);

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select", "split frames into key / non-key by change score");
  c_sel->add_option("--input", sel.input, "frame tensor (.mreb)")->required();
  c_sel->add_option("--k", sel.k, "number of key frames");
  c_sel->add_option("--sigma", sel.sigma, "Gaussian std-dev in frames");
  c_sel->add_option("--out", sel.out, "output JSON (default stdout)");
  c_sel->add_option("--keys-out", sel.keys_out, "write key frames as .mreb");
  c_sel->add_option("--nonkeys-out", sel.nonkeys_out, "write non-key frames as .mreb");

  ProfileArgs prof;
  auto* c_prof = app.add_subcommand("profile", "dump the raw and smoothed change curve as CSV");
  c_prof->add_option("--input", prof.input, "frame tensor (.mreb)")->required();
  c_prof->add_option("--sigma", prof.sigma, "Gaussian std-dev in frames");
  c_prof->add_option("--out", prof.out, "output CSV (default stdout)");

  CompressArgs comp;
  auto* c_comp = app.add_subcommand("compress", "compress non-key frame tokens and project");
  c_comp->add_option("--keys", comp.keys, "key-frame query tensor (.mreb)")->required();
  c_comp->add_option("--nonkeys", comp.nonkeys, "non-key query tensor (.mreb)");
  c_comp->add_option("--method", comp.method, "avgpool|variance|none")->check(CLI::IsMember({"avgpool", "variance", "none"}));
  c_comp->add_option("--target-tokens", comp.target_tokens, "tokens per non-key frame");
  c_comp->add_option("--split", comp.split, "JSON with key_indices / nonkey_indices (from select)");
  c_comp->add_option("--lang-dim", comp.lang_dim, "language-space dim (0 = identity)");
  c_comp->add_option("--projector-seed", comp.projector_seed, "seed of the linear projector");
  c_comp->add_option("--out", comp.out, "output tensor (.mreb); sidecar written to <out>.json")->required();

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "build the interleaved time/frame sequence per record");
  c_enc->add_option("--records", enc.records, "records (.jsonl)")->required();
  c_enc->add_option("--frames", enc.frames, ".mreb file shared by all records, or a directory of <video_id>.mreb")
      ->required();
  c_enc->add_option("--scheme", enc.scheme, "auto|index|timestamp|absolute")
      ->check(CLI::IsMember({"auto", "index", "timestamp", "absolute"}));
  c_enc->add_option("--fps", enc.fps, "native frame rate for the absolute scheme");
  c_enc->add_option("--prompt", enc.prompt, "task prompt text");
  c_enc->add_option("--special-tokens", enc.special, "both|time|frame|none")
      ->check(CLI::IsMember({"both", "time", "frame", "none"}));
  c_enc->add_option("--out", enc.out, "output text (default stdout)");

  ParseArgs par;
  auto* c_par = app.add_subcommand("parse", "normalize raw predictions, one per line");
  c_par->add_option("--in", par.in, "text file")->required();
  c_par->add_option("--out", par.out, "output JSONL (default stdout)");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "score predictions against ground truth");
  c_ev->add_option("--gt", ev.gt, "ground-truth records (.jsonl)")->required();
  c_ev->add_option("--pred", ev.pred, "predictions (.jsonl)")->required();
  c_ev->add_option("--r1", ev.r1, "R1 IoU thresholds");
  c_ev->add_option("--map", ev.map, "mAP IoU thresholds");
  c_ev->add_option("--map-protocol", ev.protocol, "per_query|corpus");
  c_ev->add_option("--out", ev.out, "report JSON (default stdout)");

  SuiteArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate synthetic videos and run the full pipeline");
  c_sim->add_option("--config", sim.config, "settings file (key = value)");
  c_sim->add_option("--out", sim.out, "report JSON (default stdout)");
  c_sim->add_option("--timings", sim.timings, "stage timing JSON");
  c_sim->add_option("--predictions-out", sim.predictions_out, "per-query predictions (.jsonl)");
  c_sim->add_option("--emit-dir", sim.emit_dir, "also write records.jsonl and frames/*.mreb here");
  add_setting_flags(c_sim, sim);

  SuiteArgs run;
  auto* c_run = app.add_subcommand("run", "run the pipeline over a records file and frame directory");
  c_run->add_option("--records", run.records, "records (.jsonl)")->required();
  c_run->add_option("--frames-dir", run.frames_dir, "directory of <video_id>.mreb")->required();
  c_run->add_option("--config", run.config, "settings file (key = value)");
  c_run->add_option("--out", run.out, "report JSON (default stdout)");
  c_run->add_option("--timings", run.timings, "stage timing JSON");
  c_run->add_option("--predictions-out", run.predictions_out, "per-query predictions (.jsonl)");
  add_setting_flags(c_run, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*c_sel) run_select(sel);
    else if (*c_prof) run_profile(prof);
    else if (*c_comp) run_compress(comp);
    else if (*c_enc) run_encode(enc);
    else if (*c_par) run_parse(par);
    else if (*c_ev) run_eval(ev);
    else if (*c_sim) run_simulate(sim, c_sim);
    else if (*c_run) run_suite_cmd(run, c_run);
  } catch (const mrkit::Error& e) {
    std::cerr << "error [" << mrkit::to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == mrkit::Errc::invariant_violation ? kInvariantError : kInputError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [malformed_record]: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io_failure]: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariantError;
  }
  return 0;
}
