// Command-line entry point: dataset generation, tokenizer and VLM training,
// tokenization, generation and evaluation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <cstdio>
#include <iostream>

#include "sde/app/experiment.hpp"
#include "sde/app/pipeline.hpp"
#include "sde/errors.hpp"
#include "sde/eval/grouping.hpp"
#include "sde/eval/metrics.hpp"
#include "sde/io/checkpoint.hpp"
#include "sde/io/png.hpp"
#include "sde/lm/corpus_io.hpp"
#include "sde/lm/sampling.hpp"
#include "sde/tensor_utils.hpp"
#include "sde/vq/codebook_stats.hpp"

namespace fs = std::filesystem;
using namespace sde;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

constexpr const char* kTokenizerFile = "tokenizer.ckpt";
constexpr const char* kVlmFile = "vlm.ckpt";

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

class JsonLines {
 public:
  explicit JsonLines(const fs::path& path) : os_(path) {
    if (!os_) throw IoError("cannot open " + path.string() + " for writing");
  }
  void write(const nlohmann::json& j) { os_ << j.dump() << '\n'; }

 private:
  std::ofstream os_;
};

void print_record(const char* what, const nlohmann::json& rec) { std::cout << what << ' ' << rec.dump() << std::endl; }

// ---------------------------------------------------------------- commands

struct TrainTokenizerArgs {
  fs::path config, out;
  std::optional<uint64_t> seed;
  std::optional<int64_t> steps;
  fs::path resume;
};

// Resuming may extend the step budget; everything else must match.
bool resumable(app::ExperimentConfig stored, const app::ExperimentConfig& requested) {
  stored.tokenizer_steps = requested.tokenizer_steps;
  stored.lm_steps = requested.lm_steps;
  return app::config_hash(stored) == app::config_hash(requested);
}

int train_tokenizer(const TrainTokenizerArgs& a) {
  auto config = app::load_experiment(a.config);
  if (a.seed) config.seed = *a.seed;
  if (a.steps) config.tokenizer_steps = *a.steps;
  config.validate();
  const auto data = app::load_dataset(config.train_manifest);
  auto bundle = a.resume.empty() ? app::make_tokenizer(config, data) : app::load_tokenizer(a.resume);
  if (!a.resume.empty() && !resumable(bundle.config, config)) {
    throw ConfigError("resume checkpoint was trained with a different config");
  }
  bundle.config = config;
  fs::create_directories(a.out);
  JsonLines curve(a.out / "losses.jsonl");
  const auto records = app::train_tokenizer(bundle, data, config.tokenizer_steps,
                                            [](const nlohmann::json& r) { print_record("step", r); });
  for (const auto& r : records) curve.write(r);
  app::save_tokenizer(a.out / kTokenizerFile, bundle);
  std::cout << "saved " << (a.out / kTokenizerFile).string() << std::endl;
  return kOk;
}

struct TokenizeArgs {
  fs::path checkpoint, manifest, out_cache;
};

int tokenize(const TokenizeArgs& a) {
  auto bundle = app::load_tokenizer(a.checkpoint);
  const auto data = app::load_dataset(a.manifest);
  const auto codes = app::tokenize(bundle, data);
  const auto layout = app::vocab_layout(bundle.config);
  const auto corpus = app::build_corpus(codes, data.captions, layout, bundle.config.seed);
  const auto stats = vq::codebook_stats({codes}, bundle.config.tokenizer.codebook_size);
  const nlohmann::json meta = {{"config_hash", app::config_hash(bundle.config)},
                               {"seed", bundle.config.seed},
                               {"images", data.size()},
                               {"records", corpus.size()},
                               {"grid", bundle.config.tokenizer.grid_size()},
                               {"usage_fraction", stats.usage_fraction},
                               {"perplexity", stats.perplexity}};
  app::save_token_cache(a.out_cache, corpus, meta);
  print_record("codebook", meta);
  return kOk;
}

struct TrainVlmArgs {
  fs::path config, tokenizer_ckpt, out, resume;
  std::vector<fs::path> caches;
  std::optional<int64_t> steps;
};

int train_vlm(const TrainVlmArgs& a) {
  auto config = app::load_experiment(a.config);
  if (a.steps) config.lm_steps = *a.steps;
  const auto tokenizer_meta = io::load_checkpoint(a.tokenizer_ckpt).meta;
  const auto tok_config = tokenizer_meta.config.get<app::ExperimentConfig>();
  if (tok_config.tokenizer.codebook_size != config.tokenizer.codebook_size ||
      tok_config.tokenizer.grid_size() != config.tokenizer.grid_size()) {
    throw ConfigError("tokenizer checkpoint disagrees with the config's codebook size or grid");
  }
  const auto layout = app::vocab_layout(config);
  const auto grid = config.tokenizer.grid_size();
  std::vector<lm::SequenceSample> corpus;
  for (const auto& path : a.caches) {
    auto part = lm::read_token_cache(path);
    corpus.insert(corpus.end(), part.begin(), part.end());
  }
  if (const auto problems = lm::validate_corpus(corpus, layout, grid * grid); !problems.empty()) {
    throw IoError("invalid token cache: " + problems.front());
  }
  auto bundle = a.resume.empty() ? app::make_vlm(config) : app::load_vlm(a.resume);
  if (!a.resume.empty() && !resumable(bundle.config, config)) {
    throw ConfigError("resume checkpoint was trained with a different config");
  }
  bundle.config = config;
  fs::create_directories(a.out);
  JsonLines curve(a.out / "losses.jsonl");
  const auto records =
      app::train_vlm(bundle, corpus, config.lm_steps, [](const nlohmann::json& r) { print_record("step", r); });
  for (const auto& r : records) curve.write(r);
  app::save_vlm(a.out / kVlmFile, bundle);
  std::cout << "saved " << (a.out / kVlmFile).string() << std::endl;
  return kOk;
}

struct GenerateArgs {
  fs::path vlm_ckpt, tokenizer_ckpt, out_image;
  std::string prompt;
  uint64_t seed = 0;
  double temperature = 1.0;
  int64_t top_k = 0;
};

int generate(const GenerateArgs& a) {
  auto vlm = app::load_vlm(a.vlm_ckpt);
  auto tok = app::load_tokenizer(a.tokenizer_ckpt);
  const auto layout = app::vocab_layout(vlm.config);
  if (layout.codebook_size() != tok.config.tokenizer.codebook_size) {
    throw ConfigError("VLM and tokenizer codebook sizes differ");
  }
  const auto grid = tok.config.tokenizer.grid_size();
  const auto prompt = lm::generation_prompt(lm::generation_instructions().front(), a.prompt, layout);
  const auto codes = lm::generate_image_tokens(*vlm.model, prompt, layout, grid * grid,
                                               {a.temperature, a.top_k, a.seed});
  auto image = app::reconstruct(tok, torch::tensor(codes, torch::kLong).reshape({1, grid, grid}));
  if (a.out_image.has_parent_path()) fs::create_directories(a.out_image.parent_path());
  io::write_png(a.out_image, image[0]);
  print_record("generated", {{"tokens", codes.size()}, {"codes", codes}, {"image", a.out_image.string()}});
  return kOk;
}

struct ReconstructArgs {
  fs::path checkpoint, manifest, out_dir;
};

int reconstruct(const ReconstructArgs& a) {
  auto bundle = app::load_tokenizer(a.checkpoint);
  const auto data = app::load_dataset(a.manifest);
  const auto recon = app::reconstruct(bundle, app::tokenize(bundle, data));
  fs::create_directories(a.out_dir);
  for (int64_t i = 0; i < data.size(); ++i) {
    io::write_png(a.out_dir / (data.refs[static_cast<std::size_t>(i)].image_id + ".png"), recon[i]);
  }
  std::cout << "wrote " << data.size() << " reconstructions to " << a.out_dir.string() << std::endl;
  return kOk;
}

struct EvaluateArgs {
  fs::path checkpoint, manifest, out;
  uint64_t seed = 0;
};

int evaluate(const EvaluateArgs& a) {
  auto bundle = app::load_tokenizer(a.checkpoint);
  const auto data = app::load_dataset(a.manifest);
  const auto codes = app::tokenize(bundle, data);
  const auto recon = app::reconstruct(bundle, codes);
  eval::ReconMetrics m;
  m.psnr = eval::mean_psnr(data.images, recon);
  m.ssim = eval::ssim(data.images, recon);
  auto trunk = bundle.perceptual->trunk();
  if (data.size() >= 2) {
    m.rfid = eval::rfid(data.images, recon, [&](const torch::Tensor& x) { return trunk->forward(x).mean({2, 3}); });
  }
  const auto stats = vq::codebook_stats({codes}, bundle.config.tokenizer.codebook_size);
  const auto noise = torch::rand(data.images.sizes(), seeded_generator(a.seed));
  nlohmann::json report = {{"reconstruction", m},
                           {"baseline",
                            {{"psnr", eval::mean_psnr(data.images, noise)}, {"ssim", eval::ssim(data.images, noise)}}},
                           {"codebook", {{"usage_fraction", stats.usage_fraction}, {"perplexity", stats.perplexity}}},
                           {"images", data.size()},
                           {"config_hash", app::config_hash(bundle.config)},
                           {"seed", bundle.config.seed},
                           {"rfid_extractor", "frozen trunk, global average pool"}};
  write_json(a.out, report);
  print_record("metrics", report);
  return kOk;
}

struct InspectArgs {
  fs::path checkpoint, manifest, out_dir;
  int64_t top = 16;
};

int inspect_codes(const InspectArgs& a) {
  auto bundle = app::load_tokenizer(a.checkpoint);
  const auto data = app::load_dataset(a.manifest);
  const auto codes = app::tokenize(bundle, data);
  const auto ids = data.image_ids();
  const auto index = eval::group_codes(codes, ids);
  std::vector<std::pair<int64_t, std::size_t>> ranked;
  for (const auto& [code, locs] : index) ranked.emplace_back(code, locs.size());
  std::stable_sort(ranked.begin(), ranked.end(), [](auto& x, auto& y) { return x.second > y.second; });

  fs::create_directories(a.out_dir);
  nlohmann::json summary = nlohmann::json::array();
  const auto patch = bundle.config.tokenizer.downsample;
  for (std::size_t r = 0; r < ranked.size() && static_cast<int64_t>(r) < a.top; ++r) {
    const auto code = ranked[r].first;
    char name[32];
    std::snprintf(name, sizeof name, "code_%05lld.png", static_cast<long long>(code));
    const auto path = a.out_dir / name;
    io::write_png(path, eval::code_mosaic(data.images, ids, index, code, patch));
    nlohmann::json images = nlohmann::json::array();
    for (const auto& loc : index.at(code)) images.push_back({loc.image_id, loc.i, loc.j});
    summary.push_back({{"code", code}, {"count", ranked[r].second}, {"mosaic", path.filename()}, {"patches", images}});
  }
  write_json(a.out_dir / "codes.json", summary);
  std::cout << "indexed " << index.size() << " codes; wrote " << summary.size() << " mosaics to " << a.out_dir.string()
            << std::endl;
  return kOk;
}

struct ToyArgs {
  fs::path out;
  int64_t count = 512;
  int64_t size = 64;
  uint64_t seed = 1;
};

int make_toy(const ToyArgs& a) {
  const auto manifest = app::write_toy_dataset(a.out, a.count, a.size, a.seed);
  std::cout << "wrote " << a.count << " images; manifest " << manifest.string() << std::endl;
  return kOk;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kConfig;
  } catch (const TrainingDivergence& e) {
    std::cerr << e.what() << std::endl;
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << std::endl;
    return kIo;
  } catch (const LookupError& e) {
    std::cerr << "i/o error: " << e.what() << std::endl;
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Semantic discrete encoding tokenizer and unified vision-language model"};
  cli.require_subcommand(1);
  int rc = kOk;

  ToyArgs toy;
  auto* c_toy = cli.add_subcommand("make-toy-dataset", "Write the procedural shapes dataset as PNGs plus a manifest");
  c_toy->add_option("--out", toy.out, "Output directory")->required();
  c_toy->add_option("--count", toy.count, "Number of images");
  c_toy->add_option("--size", toy.size, "Image side in pixels");
  c_toy->add_option("--seed", toy.seed, "Generator seed");
  c_toy->callback([&] { rc = run_guarded([&] { return make_toy(toy); }); });

  TrainTokenizerArgs tt;
  auto* c_tt = cli.add_subcommand("train-tokenizer", "Train the SDE tokenizer");
  c_tt->add_option("--config", tt.config, "Experiment config (JSON)")->required();
  c_tt->add_option("--out", tt.out, "Output directory for checkpoint and loss log")->required();
  c_tt->add_option("--seed", tt.seed, "Override the config seed");
  c_tt->add_option("--steps", tt.steps, "Override the number of training steps");
  c_tt->add_option("--resume", tt.resume, "Continue from a tokenizer checkpoint");
  c_tt->callback([&] { rc = run_guarded([&] { return train_tokenizer(tt); }); });

  TokenizeArgs tk;
  auto* c_tk = cli.add_subcommand("tokenize", "Tokenize a dataset into an SDETOK01 cache");
  c_tk->add_option("--checkpoint", tk.checkpoint, "Tokenizer checkpoint")->required();
  c_tk->add_option("--manifest", tk.manifest, "Dataset manifest (JSON lines)")->required();
  c_tk->add_option("--out-cache", tk.out_cache, "Output token cache")->required();
  c_tk->callback([&] { rc = run_guarded([&] { return tokenize(tk); }); });

  TrainVlmArgs tv;
  auto* c_tv = cli.add_subcommand("train-vlm", "Train the unified autoregressive model");
  c_tv->add_option("--config", tv.config, "Experiment config (JSON)")->required();
  c_tv->add_option("--tokenizer-ckpt", tv.tokenizer_ckpt, "Tokenizer checkpoint the caches came from")->required();
  c_tv->add_option("--caches", tv.caches, "Token caches")->required();
  c_tv->add_option("--out", tv.out, "Output directory for checkpoint and loss log")->required();
  c_tv->add_option("--steps", tv.steps, "Override the number of training steps");
  c_tv->add_option("--resume", tv.resume, "Continue from a VLM checkpoint");
  c_tv->callback([&] { rc = run_guarded([&] { return train_vlm(tv); }); });

  GenerateArgs gen;
  auto* c_gen = cli.add_subcommand("generate", "Generate an image from a caption");
  c_gen->add_option("--vlm-ckpt", gen.vlm_ckpt, "VLM checkpoint")->required();
  c_gen->add_option("--tokenizer-ckpt", gen.tokenizer_ckpt, "Tokenizer checkpoint")->required();
  c_gen->add_option("--prompt", gen.prompt, "Caption")->required();
  c_gen->add_option("--seed", gen.seed, "Sampling seed");
  c_gen->add_option("--temperature", gen.temperature, "Sampling temperature (<= 0 is greedy)");
  c_gen->add_option("--top-k", gen.top_k, "Top-k filter (0 disables)");
  c_gen->add_option("--out-image", gen.out_image, "Output PNG")->required();
  c_gen->callback([&] { rc = run_guarded([&] { return generate(gen); }); });

  ReconstructArgs rec;
  auto* c_rec = cli.add_subcommand("reconstruct", "Tokenize and decode every image of a dataset");
  c_rec->add_option("--checkpoint", rec.checkpoint, "Tokenizer checkpoint")->required();
  c_rec->add_option("--manifest", rec.manifest, "Dataset manifest")->required();
  c_rec->add_option("--out-dir", rec.out_dir, "Output directory")->required();
  c_rec->callback([&] { rc = run_guarded([&] { return reconstruct(rec); }); });

  EvaluateArgs ev;
  auto* c_ev = cli.add_subcommand("evaluate", "Reconstruction metrics and codebook statistics as JSON");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Tokenizer checkpoint")->required();
  c_ev->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  c_ev->add_option("--out", ev.out, "Output JSON report")->required();
  c_ev->add_option("--seed", ev.seed, "Seed of the random-image baseline");
  c_ev->callback([&] { rc = run_guarded([&] { return evaluate(ev); }); });

  InspectArgs in;
  auto* c_in = cli.add_subcommand("inspect-codes", "Per-code patch mosaics for the most used codes");
  c_in->add_option("--checkpoint", in.checkpoint, "Tokenizer checkpoint")->required();
  c_in->add_option("--manifest", in.manifest, "Dataset manifest")->required();
  c_in->add_option("--out-dir", in.out_dir, "Output directory")->required();
  c_in->add_option("--top", in.top, "Number of codes to render");
  c_in->callback([&] { rc = run_guarded([&] { return inspect_codes(in); }); });

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  return rc;
}
