// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. `acceptance 1 3 7` runs a subset.

#include <torch/torch.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "fixtures.hpp"
#include "sde/adversarial/discriminator.hpp"
#include "sde/adversarial/perceptual.hpp"
#include "sde/app/pipeline.hpp"
#include "sde/data/toy_dataset.hpp"
#include "sde/eval/metrics.hpp"
#include "sde/eval/probe.hpp"
#include "sde/io/checkpoint.hpp"
#include "sde/lm/corpus_io.hpp"
#include "sde/lm/objective.hpp"
#include "sde/lm/sampling.hpp"
#include "sde/semantic/target.hpp"
#include "sde/tensor_utils.hpp"
#include "sde/tokenizer/model.hpp"
#include "sde/vq/quantizer.hpp"

namespace fs = std::filesystem;
using namespace sde;
using Clock = std::chrono::steady_clock;

namespace {

// ---------------------------------------------------------------- tolerances

constexpr int kQuantizerInstances = 200;
constexpr double kQuantizerSeconds = 10.0;

constexpr double kFdStep = 1e-6;
constexpr double kGradRelTol = 1e-3;
constexpr double kVqGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-6;  // denominator floor of the relative error
constexpr double kGradSeconds = 60.0;

constexpr int kSemSamples = 1000;
constexpr double kIdentityTol = 1e-6;

constexpr int64_t kProbeSteps = 600;
constexpr double kProbeMarginPoints = 10.0;
constexpr double kProbeMinutes = 20.0;

constexpr int64_t kReconSteps = 2000;
constexpr int64_t kReconImages = 64;
constexpr double kPsnrMarginDb = 5.0;

constexpr int kGenerations = 100;

constexpr int kLossBatches = 50;
constexpr double kLossTol = 1e-6;

constexpr int64_t kDeterminismSteps = 12;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sde_acceptance_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

app::ExperimentConfig toy_experiment() {
  std::ifstream is(fs::path(SDE_SOURCE_DIR) / "configs" / "toy.json");
  if (!is) throw std::runtime_error("configs/toy.json not found");
  auto config = nlohmann::json::parse(is).get<app::ExperimentConfig>();
  return config;
}

// ---------------------------------------------------------------- 1

Outcome quantizer_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int64_t> k_pick(1, 64), d_pick(1, 16), g_pick(1, 8), b_pick(1, 3);
  int64_t cells = 0, matched = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < kQuantizerInstances; ++i) {
    const auto k = k_pick(rng), d = d_pick(rng), h = g_pick(rng), w = g_pick(rng), b = b_pick(rng);
    auto gen = seeded_generator(rng());
    auto entries = torch::randn({k, d}, gen);
    if (i % 4 == 0 && k > 1) entries[k - 1].copy_(entries[0]);  // exact tie between rows 0 and k-1
    auto z = torch::randn({b, h, w, d}, gen);
    if (i % 5 == 0) z[0][0][0].copy_(entries[k - 1]);  // a cell sitting exactly on an entry
    const auto result = vq::quantize(z, entries);
    const auto expect = support::brute_force_codes(z.reshape({-1, d}), entries).reshape({b, h, w});
    cells += expect.numel();
    matched += result.codes.eq(expect).sum().item<int64_t>();
  }
  const double secs = seconds_since(t0);
  return {matched == cells && secs < kQuantizerSeconds,
          std::to_string(matched) + "/" + std::to_string(cells) + " cells match brute force in " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 2

struct GradStats {
  double worst = 0.0;
  int checked = 0;
  void add(double analytic, double numeric) {
    worst = std::max(worst, support::relative_error(analytic, numeric, kGradFloor));
    ++checked;
  }
};

std::vector<int64_t> probe_indices(int64_t numel, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int64_t> pick(0, numel - 1);
  std::vector<int64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(pick(rng));
  return out;
}

Outcome gradient_suite() {
  torch::manual_seed(0);
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  auto dopt = torch::TensorOptions().dtype(torch::kFloat64);

  // L_vq. Stop-gradient operands are constants of the partial derivative, so
  // d/dz is checked against beta * commitment(z) and d/de against
  // codebook_loss(e), each varied alone.
  GradStats vq_stats;
  for (int trial = 0; trial < 5; ++trial) {
    auto gen = seeded_generator(rng());
    auto z = torch::randn({2, 3, 3, 4}, gen, torch::kFloat64).requires_grad_(true);
    auto e = torch::randn({8, 4}, gen, torch::kFloat64).requires_grad_(true);
    auto q = vq::quantize(z, e, 0.25);
    vq::vq_loss(q).backward();
    for (auto idx : probe_indices(z.numel(), 6, rng)) {
      const double num = support::central_difference(z, idx, kFdStep, [&] {
        return 0.25 * vq::quantize(z, e.detach(), 0.25).commitment_loss.item<double>();
      });
      vq_stats.add(z.grad().view({-1})[idx].item<double>(), num);
    }
    for (auto idx : probe_indices(e.numel(), 6, rng)) {
      const double num = support::central_difference(e, idx, kFdStep, [&] {
        return vq::quantize(z.detach(), e, 0.25).codebook_loss.item<double>();
      });
      vq_stats.add(e.grad().view({-1})[idx].item<double>(), num);
    }
  }

  // L_sem with respect to the decoded features.
  GradStats sem_stats;
  for (int trial = 0; trial < 5; ++trial) {
    auto gen = seeded_generator(rng());
    auto decoded = torch::randn({2, 4, 4, 6}, gen, torch::kFloat64).requires_grad_(true);
    auto target = torch::randn({2, 4, 4, 6}, gen, torch::kFloat64);
    tokenizer::semantic_loss(decoded, target).backward();
    for (auto idx : probe_indices(decoded.numel(), 8, rng)) {
      const double num = support::central_difference(
          decoded, idx, kFdStep, [&] { return tokenizer::semantic_loss(decoded, target).item<double>(); });
      sem_stats.add(decoded.grad().view({-1})[idx].item<double>(), num);
    }
  }

  // Perceptual loss with respect to the reconstruction.
  GradStats perc_stats;
  auto perc = adversarial::PerceptualNet::random(7, {4, 4});
  perc.to(torch::kFloat64);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = support::random_images(2, 16, rng(), torch::kFloat64);
    auto y = support::random_images(2, 16, rng(), torch::kFloat64).requires_grad_(true);
    adversarial::perceptual_loss(perc, x, y).backward();
    for (auto idx : probe_indices(y.numel(), 8, rng)) {
      const double num = support::central_difference(
          y, idx, kFdStep, [&] { return adversarial::perceptual_loss(perc, x, y).item<double>(); });
      perc_stats.add(y.grad().view({-1})[idx].item<double>(), num);
    }
  }

  // total_loss on the miniature model. Parameters downstream of quantization
  // (image decoder, semantic decoder) see the true derivative; upstream ones
  // see the straight-through surrogate and are covered by unit tests.
  GradStats total_stats;
  const auto cfg = support::mini_config();
  tokenizer::SDEModel model(cfg, 3);
  model->to(torch::kFloat64);
  adversarial::PatchDiscriminator disc(cfg.disc_channels, cfg.disc_layers, 4);
  disc->to(torch::kFloat64);
  semantic::ClassEmbeddingProvider provider(4, cfg.sem_dim, cfg.grid_size(), cfg.grid_size(), 5);
  auto images = support::random_images(2, cfg.image_size, 6, torch::kFloat64);
  auto refs = support::labelled_refs(2, 4);
  auto target = provider.provide(images, refs);
  target.features = target.features.to(torch::kFloat64);
  auto eval_total = [&] {
    return tokenizer::total_loss(*model, images, target, perc, disc.get(), 1, 0).total.item<double>();
  };
  auto out = tokenizer::total_loss(*model, images, target, perc, disc.get(), 1, 0);
  model->zero_grad();
  out.total.backward();
  for (auto* module : {static_cast<torch::nn::Module*>(model->decoder.get()),
                       static_cast<torch::nn::Module*>(model->sem_decoder.get())}) {
    for (auto& p : module->parameters()) {
      for (auto idx : probe_indices(p.numel(), 2, rng)) {
        const double num = support::central_difference(p, idx, kFdStep, eval_total);
        total_stats.add(p.grad().view({-1})[idx].item<double>(), num);
      }
    }
  }

  const double secs = seconds_since(t0);
  const bool pass = vq_stats.worst <= kVqGradRelTol && sem_stats.worst <= kGradRelTol &&
                    perc_stats.worst <= kGradRelTol && total_stats.worst <= kGradRelTol && secs < kGradSeconds;
  return {pass, "worst rel err: vq " + fmt(vq_stats.worst, 3) + " (" + std::to_string(vq_stats.checked) + "), sem " +
                    fmt(sem_stats.worst, 3) + " (" + std::to_string(sem_stats.checked) + "), perceptual " +
                    fmt(perc_stats.worst, 3) + " (" + std::to_string(perc_stats.checked) + "), total " +
                    fmt(total_stats.worst, 3) + " (" + std::to_string(total_stats.checked) + "); " + fmt(secs) +
                    " s"};
}

// ---------------------------------------------------------------- 3

Outcome loss_identities() {
  std::mt19937_64 rng(303);
  double lo = 10.0, hi = -10.0;
  for (int i = 0; i < kSemSamples; ++i) {
    auto gen = seeded_generator(rng());
    const int64_t d = 1 + static_cast<int64_t>(rng() % 32);
    auto a = torch::randn({3, d}, gen) * std::exp(static_cast<double>(rng() % 7) - 3.0);
    auto b = torch::randn({3, d}, gen);
    if (i % 50 == 0) a.zero_();
    const double v = tokenizer::semantic_loss(a, b).item<double>();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  auto t = torch::randn({2, 4, 4, 16}, seeded_generator(9), torch::kFloat64);
  const double same = tokenizer::semantic_loss(t, t).item<double>();
  const double opposite = tokenizer::semantic_loss(-t, t).item<double>();

  const auto cfg = support::mini_config();
  tokenizer::SDEModel model(cfg, 11);
  adversarial::PatchDiscriminator disc(cfg.disc_channels, cfg.disc_layers, 12);
  auto perc = adversarial::PerceptualNet::random(13, cfg.perceptual_channels);
  semantic::ClassEmbeddingProvider provider(4, cfg.sem_dim, cfg.grid_size(), cfg.grid_size(), 14);
  double worst_identity = 0.0;
  for (int i = 0; i < 10; ++i) {
    auto images = support::random_images(3, cfg.image_size, 100 + i);
    auto refs = support::labelled_refs(3, 4);
    const auto out = tokenizer::total_loss(*model, images, provider.provide(images, refs), perc, disc.get(), i, 5);
    worst_identity = std::max(worst_identity, out.report.identity_residual());
    const double independent = out.sem.item<double>() * cfg.w_sem + out.l2.item<double>() +
                               out.perceptual.item<double>() + out.report.lambda_g * out.gen.item<double>() +
                               out.vq.item<double>();
    worst_identity = std::max(worst_identity, std::abs(independent - out.total.item<double>()));
  }
  const bool pass = lo >= 0.0 && hi <= 2.0 && std::abs(same) <= kIdentityTol &&
                    std::abs(opposite - 2.0) <= kIdentityTol && worst_identity <= kIdentityTol;
  return {pass, "L_sem range [" + fmt(lo, 6) + ", " + fmt(hi, 6) + "], L_sem(T,T)=" + fmt(same, 3) +
                    ", L_sem(-T,T)=" + fmt(opposite, 10) + ", composition residual " + fmt(worst_identity, 3)};
}

// ---------------------------------------------------------------- 4 and 5

Outcome probe_ablation() {
  const auto t0 = Clock::now();
  const auto data = app::from_toy(data::make_toy_dataset(512, 64, 1));
  auto base = toy_experiment();
  base.tokenizer_steps = kProbeSteps;
  base.tokenizer_optim.warmup_steps = kProbeSteps / 20;

  auto plain = base;
  plain.tokenizer.w_sem = 0.0;
  plain.tokenizer.fusion = false;

  auto accuracy = [&](const app::ExperimentConfig& cfg) {
    auto bundle = app::make_tokenizer(cfg, data);
    app::train_tokenizer(bundle, data, cfg.tokenizer_steps);
    const auto codes = app::tokenize(bundle, data);
    const auto features = eval::mean_pooled_embeddings(bundle.model->code_entries(), codes);
    eval::ProbeOptions opts;
    opts.seed = 17;
    return eval::linear_probe(features, data.labels(), opts);
  };
  eval::ProbeReport report;
  report.dataset_id = "toy-shapes-512";
  report.num_classes = data::kToyClasses;
  report.accuracy_sde = accuracy(base);
  report.accuracy_baseline = accuracy(plain);
  const double minutes = seconds_since(t0) / 60.0;
  const double margin = 100.0 * (report.accuracy_sde - report.accuracy_baseline);
  return {margin >= kProbeMarginPoints && minutes <= kProbeMinutes,
          "probe accuracy SDE " + fmt(100 * report.accuracy_sde, 3) + "% vs plain VQ " +
              fmt(100 * report.accuracy_baseline, 3) + "% (margin " + fmt(margin, 3) + " points, " +
              std::to_string(kProbeSteps) + " steps each, " + fmt(minutes, 3) + " min)"};
}

Outcome reconstruction_sanity() {
  const auto t0 = Clock::now();
  const auto data = app::from_toy(data::make_toy_dataset(512, 64, 1));
  auto cfg = toy_experiment();
  cfg.tokenizer_steps = kReconSteps;
  auto bundle = app::make_tokenizer(cfg, data);
  app::train_tokenizer(bundle, data, kReconSteps);

  const auto held_in = data.slice(0, kReconImages);
  const auto recon = app::reconstruct(bundle, app::tokenize(bundle, held_in));
  const auto noise = torch::rand(held_in.images.sizes(), seeded_generator(0));
  const double psnr = eval::mean_psnr(held_in.images, recon);
  const double psnr_base = eval::random_image_baseline_psnr(held_in.images, 0);
  const double ssim = eval::ssim(held_in.images, recon);
  const double ssim_base = eval::ssim(held_in.images, noise);
  return {psnr >= psnr_base + kPsnrMarginDb && ssim > ssim_base,
          "PSNR " + fmt(psnr) + " dB vs random-image baseline " + fmt(psnr_base) + " dB; SSIM " + fmt(ssim) +
              " vs " + fmt(ssim_base) + " (" + std::to_string(kReconSteps) + " steps, " +
              fmt(seconds_since(t0) / 60.0, 3) + " min)"};
}

// ---------------------------------------------------------------- 6

std::vector<std::pair<std::string, lm::SequenceSample>> mutations(const lm::SequenceSample& s,
                                                                  const lm::VocabLayout& layout) {
  std::vector<std::pair<std::string, lm::SequenceSample>> out;
  auto find = [&](int64_t id) {
    return static_cast<std::size_t>(std::find(s.ids.begin(), s.ids.end(), id) - s.ids.begin());
  };
  const auto soi = find(layout.soi());
  const auto eoi = find(layout.eoi());
  auto erase = [](lm::SequenceSample m, std::size_t at) {
    m.ids.erase(m.ids.begin() + static_cast<std::ptrdiff_t>(at));
    m.loss_mask.erase(m.loss_mask.begin() + static_cast<std::ptrdiff_t>(at));
    return m;
  };
  auto insert = [](lm::SequenceSample m, std::size_t at, int64_t id) {
    m.ids.insert(m.ids.begin() + static_cast<std::ptrdiff_t>(at), id);
    m.loss_mask.insert(m.loss_mask.begin() + static_cast<std::ptrdiff_t>(at), 0);
    return m;
  };
  auto replace = [](lm::SequenceSample m, std::size_t at, int64_t id) {
    m.ids[at] = id;
    return m;
  };
  out.emplace_back("dropped eoi", erase(s, eoi));
  out.emplace_back("dropped soi", erase(s, soi));
  out.emplace_back("short grid", erase(s, soi + 1));
  out.emplace_back("short grid by 5", erase(erase(erase(erase(erase(s, soi + 1), soi + 1), soi + 1), soi + 1), soi + 1));
  out.emplace_back("long grid", insert(s, soi + 1, layout.visual_base()));
  out.emplace_back("id above vocabulary", replace(s, soi + 2, layout.total()));
  out.emplace_back("id far above vocabulary", replace(s, soi + 2, layout.total() + 1000));
  out.emplace_back("negative id", replace(s, soi + 2, -1));
  out.emplace_back("text id inside grid", replace(s, soi + 2, 65));
  out.emplace_back("special id inside grid", replace(s, soi + 2, layout.pad()));
  out.emplace_back("visual id outside grid", insert(s, 1, layout.visual_base() + 3));
  out.emplace_back("eoi replaced by visual id", replace(s, eoi, layout.visual_base()));
  out.emplace_back("nested soi", insert(s, soi + 3, layout.soi()));
  out.emplace_back("missing eos", erase(s, s.ids.size() - 1));
  auto mask_short = s;
  mask_short.loss_mask.pop_back();
  out.emplace_back("mask length mismatch", mask_short);
  return out;
}

Outcome framing_invariants() {
  auto cfg = toy_experiment();
  const auto layout = app::vocab_layout(cfg);
  const int64_t grid_len = cfg.tokenizer.grid_size() * cfg.tokenizer.grid_size();
  auto vlm = app::make_vlm(cfg);

  int framed = 0;
  for (int i = 0; i < kGenerations; ++i) {
    lm::SamplerConfig sampler;
    sampler.seed = 1000 + static_cast<uint64_t>(i);
    sampler.temperature = (i % 4 == 0) ? 0.0 : 0.5 + 0.25 * (i % 3);
    sampler.top_k = (i % 5 == 0) ? 0 : 1 + (i % 40);
    const auto prompt = lm::generation_prompt(lm::generation_instructions()[static_cast<std::size_t>(i) % 8],
                                              "a red circle on a black background", layout);
    const auto codes = lm::generate_image_tokens(*vlm.model, prompt, layout, grid_len, sampler);
    // Frame exactly as the decoder would see it and validate.
    lm::SequenceSample s;
    s.ids = prompt;
    for (auto c : codes) s.ids.push_back(layout.visual_base() + c);
    s.ids.push_back(layout.eoi());
    s.ids.push_back(layout.eos());
    s.loss_mask.assign(s.ids.size(), 1);
    s.loss_mask[0] = 0;
    bool ok = static_cast<int64_t>(codes.size()) == grid_len && lm::validate_sample(s, layout, grid_len).empty();
    for (auto c : codes) ok = ok && c >= 0 && c < layout.codebook_size();
    framed += ok ? 1 : 0;
  }

  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int64_t> code(0, layout.codebook_size() - 1);
  int mutants = 0, rejected = 0, valid_ok = 0, valid_total = 0;
  for (int i = 0; i < 10; ++i) {
    std::vector<int64_t> grid(static_cast<std::size_t>(grid_len));
    for (auto& c : grid) c = code(rng);
    const auto caption = lm::encode_bytes("a green ring on a white background");
    const auto samples = {lm::assemble_understanding(lm::encode_bytes(app::kDescribePrompt), grid, caption, layout),
                          lm::assemble_generation(lm::encode_bytes(lm::pick_instruction(rng)), caption, grid, layout)};
    for (const auto& s : samples) {
      ++valid_total;
      valid_ok += lm::validate_sample(s, layout, grid_len).empty() ? 1 : 0;
      for (const auto& [name, m] : mutations(s, layout)) {
        ++mutants;
        std::vector<lm::SequenceSample> corpus{s, m, s};
        rejected += lm::validate_corpus(corpus, layout, grid_len).empty() ? 0 : 1;
      }
    }
  }
  const bool pass = framed == kGenerations && rejected == mutants && valid_ok == valid_total;
  return {pass, std::to_string(framed) + "/" + std::to_string(kGenerations) + " generations framed with " +
                    std::to_string(grid_len) + " visual ids; validator rejected " + std::to_string(rejected) + "/" +
                    std::to_string(mutants) + " mutants and accepted " + std::to_string(valid_ok) + "/" +
                    std::to_string(valid_total) + " valid samples"};
}

// ---------------------------------------------------------------- 7

Outcome masked_loss_oracle() {
  const lm::VocabLayout layout(lm::kByteVocab, 512);
  lm::ARConfig small;
  small.width = 32;
  small.layers = 2;
  small.heads = 2;
  small.context = 128;
  auto model = lm::extend_embeddings(nullptr, small, layout, 7);
  {
    // Nonzero visual head rows so every logit column matters.
    torch::NoGradGuard no_grad;
    model->head->weight.copy_(torch::randn(model->head->weight.sizes(), seeded_generator(8)) * 0.5);
  }
  model->to(torch::kFloat64);
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int64_t> text(0, 255), code(0, 511), len(0, 12), grid(1, 16);
  double worst = 0.0;
  for (int b = 0; b < kLossBatches; ++b) {
    std::vector<lm::SequenceSample> samples;
    const auto n = 1 + static_cast<int>(rng() % 5);
    const auto g = grid(rng);
    for (int i = 0; i < n; ++i) {
      std::vector<int64_t> t1(static_cast<std::size_t>(len(rng))), t2(static_cast<std::size_t>(len(rng))),
          codes(static_cast<std::size_t>(g));
      for (auto& x : t1) x = text(rng);
      for (auto& x : t2) x = text(rng);
      for (auto& x : codes) x = code(rng);
      auto s = (rng() % 2) ? lm::assemble_understanding(t1, codes, t2, layout)
                           : lm::assemble_generation(t1, t2, codes, layout);
      if (rng() % 7 == 0) lm::use_full_mask(s);
      samples.push_back(std::move(s));
    }
    const auto batch = lm::collate(samples, layout);
    const auto loss = lm::lm_loss(*model, batch).loss.item<double>();
    torch::NoGradGuard no_grad;
    const auto logits = model->forward(batch.ids.slice(1, 0, batch.ids.size(1) - 1));
    worst = std::max(worst, std::abs(loss - support::masked_ce_oracle(logits, batch)));
  }

  // Uniform logits: a zero head makes every logit zero.
  double uniform_err = 0.0;
  {
    torch::NoGradGuard no_grad;
    model->head->weight.zero_();
  }
  std::vector<int64_t> codes(64, 3);
  const std::vector<lm::SequenceSample> samples{
      lm::assemble_generation(lm::encode_bytes("Show me a photo."), lm::encode_bytes("a cat"), codes, layout)};
  const auto uniform = lm::lm_loss(*model, lm::collate(samples, layout)).loss.item<double>();
  uniform_err = std::abs(uniform - std::log(static_cast<double>(layout.total())));
  return {worst <= kLossTol && uniform_err <= kLossTol,
          "max |lm_loss - oracle| over " + std::to_string(kLossBatches) + " batches " + fmt(worst, 3) +
              "; uniform loss " + fmt(uniform, 10) + " vs ln " + std::to_string(layout.total()) + " (err " +
              fmt(uniform_err, 3) + ")"};
}

// ---------------------------------------------------------------- 8

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream x(a, std::ios::binary), y(b, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(x)), {}), sb((std::istreambuf_iterator<char>(y)), {});
  return !sa.empty() && sa == sb;
}

Outcome determinism_persistence() {
  const auto dir = scratch_dir("persistence");
  const auto data = app::from_toy(data::make_toy_dataset(64, 64, 2));
  auto cfg = toy_experiment();
  cfg.tokenizer_steps = 2 * kDeterminismSteps;
  cfg.tokenizer.disc_start = kDeterminismSteps / 2;

  // Identical seeds give identical curves.
  auto run = [&](int64_t until) {
    auto b = app::make_tokenizer(cfg, data);
    return std::make_pair(app::train_tokenizer(b, data, until), std::move(b));
  };
  auto [curve_a, bundle_a] = run(2 * kDeterminismSteps);
  auto [curve_b, bundle_b] = run(2 * kDeterminismSteps);
  const bool same_curves = curve_a == curve_b;

  // Checkpoint round trip, then resume: the resumed half matches the straight run.
  auto [half, half_bundle] = run(kDeterminismSteps);
  app::save_tokenizer(dir / "half.ckpt", half_bundle);
  auto restored = app::load_tokenizer(dir / "half.ckpt");
  app::save_tokenizer(dir / "half_again.ckpt", restored);
  const bool ckpt_exact =
      io::content_hash(io::load_tensor_archive(dir / "half.ckpt")) ==
          io::content_hash(io::load_tensor_archive(dir / "half_again.ckpt")) &&
      parameter_hash(*restored.model) == parameter_hash(*half_bundle.model) &&
      parameter_hash(*restored.disc) == parameter_hash(*half_bundle.disc);
  auto rest = app::train_tokenizer(restored, data, 2 * kDeterminismSteps);
  half.insert(half.end(), rest.begin(), rest.end());
  const bool resumed_same = half == curve_a;

  // LM curves, checkpoint and resume.
  const auto layout = app::vocab_layout(cfg);
  const auto corpus = app::build_corpus(app::tokenize(bundle_a, data), data.captions, layout, cfg.seed);
  cfg.lm.width = 64;
  cfg.lm.layers = 2;
  cfg.lm.heads = 2;
  cfg.lm_steps = 2 * kDeterminismSteps;
  auto lm_run = [&](int64_t until) {
    auto v = app::make_vlm(cfg);
    return std::make_pair(app::train_vlm(v, corpus, until), std::move(v));
  };
  auto [lm_a, vlm_a] = lm_run(2 * kDeterminismSteps);
  auto [lm_b, vlm_b] = lm_run(2 * kDeterminismSteps);
  auto [lm_half, vlm_half] = lm_run(kDeterminismSteps);
  app::save_vlm(dir / "vlm.ckpt", vlm_half);
  auto vlm_restored = app::load_vlm(dir / "vlm.ckpt");
  const bool vlm_exact = parameter_hash(*vlm_restored.model) == parameter_hash(*vlm_half.model);
  auto lm_rest = app::train_vlm(vlm_restored, corpus, 2 * kDeterminismSteps);
  lm_half.insert(lm_half.end(), lm_rest.begin(), lm_rest.end());
  const bool lm_same = lm_a == lm_b && lm_half == lm_a;

  // File formats.
  lm::write_token_cache(dir / "a.tok", corpus);
  const auto reread = lm::read_token_cache(dir / "a.tok");
  lm::write_token_cache(dir / "b.tok", reread);
  const bool tok_exact = reread == corpus && same_bytes(dir / "a.tok", dir / "b.tok");

  auto grid = torch::randn({8, 8, 64}, seeded_generator(88));
  grid[0][0][0] = -0.0f;
  grid[1][1][1] = std::numeric_limits<float>::denorm_min();
  semantic::write_semantic_file(dir / "a.sem", grid);
  const auto grid_back = semantic::read_semantic_file(dir / "a.sem");
  semantic::write_semantic_file(dir / "b.sem", grid_back);
  const bool sem_exact = tensors_hash({grid}) == tensors_hash({grid_back}) && same_bytes(dir / "a.sem", dir / "b.sem");

  fs::remove_all(dir.parent_path());
  const bool pass = same_curves && ckpt_exact && resumed_same && vlm_exact && lm_same && tok_exact && sem_exact;
  auto yn = [](bool b) { return b ? "yes" : "NO"; };
  return {pass, std::string("tokenizer curves identical ") + yn(same_curves) + ", checkpoint bit-exact " +
                    yn(ckpt_exact) + ", resume identical " + yn(resumed_same) + ", VLM checkpoint bit-exact " +
                    yn(vlm_exact) + ", VLM curves/resume identical " + yn(lm_same) + ", SDETOK01 " +
                    yn(tok_exact) + ", SDESEM01 " + yn(sem_exact)};
}

// ---------------------------------------------------------------- 9

Outcome freeze_contracts() {
  const auto data = app::from_toy(data::make_toy_dataset(64, 64, 3));
  auto cfg = toy_experiment();
  cfg.tokenizer_steps = 8;
  cfg.tokenizer.disc_start = 2;
  bool provider_frozen = true;
  std::string kinds;
  for (const std::string kind : {"class-embedding", "frozen-net"}) {
    cfg.provider.kind = kind;
    cfg.provider.frozen_net_steps = 20;
    auto bundle = app::make_tokenizer(cfg, data);
    const auto before = bundle.provider->parameter_hash();
    app::train_tokenizer(bundle, data, cfg.tokenizer_steps);
    provider_frozen = provider_frozen && before == bundle.provider->parameter_hash();
    kinds += (kinds.empty() ? "" : ", ") + kind;
  }

  const lm::VocabLayout layout(lm::kByteVocab, 512);
  lm::ARConfig small;
  small.width = 64;
  small.layers = 2;
  small.heads = 2;
  small.context = 256;
  lm::ARModel base(small, layout.text_vocab(), 31);
  auto extended = lm::extend_embeddings(base.get(), small, layout, 32);
  auto again = lm::extend_embeddings(base.get(), small, layout, 32);
  const auto n = layout.text_vocab();
  const bool rows_exact =
      torch::equal(extended->tok_emb->weight.slice(0, 0, n), base->tok_emb->weight) &&
      torch::equal(extended->head->weight.slice(0, 0, n), base->head->weight) &&
      parameter_hash(*extended) == parameter_hash(*again);

  torch::NoGradGuard no_grad;
  base->eval();
  extended->eval();
  auto prompt = torch::tensor(lm::encode_bytes("a blue square on a red background"), torch::kLong).unsqueeze(0);
  const auto base_logits = base->forward(prompt);
  const auto ext_logits = extended->forward(prompt).slice(2, 0, n);
  const double logit_diff = (base_logits - ext_logits).abs().max().item<double>();
  const bool logits_same = logit_diff <= 1e-6;
  return {provider_frozen && rows_exact && logits_same,
          "provider hash unchanged (" + kinds + "): " + (provider_frozen ? "yes" : "NO") +
              "; text rows bit-exact: " + (rows_exact ? "yes" : "NO") + "; max text-logit change " +
              fmt(logit_diff, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  ::setenv("SDE_DETERMINISTIC", "1", 1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"quantizer oracle equivalence", quantizer_oracle},
      {"gradient suite", gradient_suite},
      {"loss identities", loss_identities},
      {"semantic probe ablation", probe_ablation},
      {"reconstruction sanity", reconstruction_sanity},
      {"framing and constrained decoding", framing_invariants},
      {"masked-loss oracle", masked_loss_oracle},
      {"determinism and persistence", determinism_persistence},
      {"freeze contracts", freeze_contracts},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
