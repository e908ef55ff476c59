// Command-line front end: speckle simulation, denoising, metrics and
// parameter sweeps over PGM / raw-double images. Every run that produces
// files also writes a JSON manifest with the fully resolved parameters;
// `despeckle replay <manifest>` re-executes it bit-identically.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "despeckle/io.hpp"
#include "despeckle/pipeline.hpp"

using json = nlohmann::json;
using namespace despeckle;

namespace {

std::string version_string() {
#ifdef DESPECKLE_VERSION
  return DESPECKLE_VERSION;
#else
  return "0.0.0";
#endif
}

// Relative output paths are placed under $DESPECKLE_OUTPUT_DIR when set.
std::string resolve_output(const std::string& path) {
  const char* dir = std::getenv("DESPECKLE_OUTPUT_DIR");
  if (!dir || *dir == '\0') return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(dir) / p).string();
}

void write_manifest(const std::string& command, const json& params,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::string& path) {
  json m;
  m["command"] = command;
  m["version"] = version_string();
  m["rng"] = {{"algorithm", Rng::algorithm_id}, {"seed", seed}};
  m["params"] = params;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << m.dump(2) << '\n';
}

Image load_positive_image(const std::string& path, std::size_t* clamped = nullptr) {
  Image im = read_image(path);
  std::size_t fixed = 0;
  for (double& v : im.pixels()) {
    if (!(v > 0.0)) {
      v = 1.0;
      ++fixed;
    }
  }
  if (fixed > 0)
    std::cerr << "warning: " << fixed << " nonpositive pixels clamped to 1\n";
  if (clamped) *clamped = fixed;
  return im;
}

int run_simulate(const json& p) {
  const Image s0 = load_positive_image(p.at("input"));
  const NoiseModel model(p.at("looks"), p.at("mu"));
  const std::uint64_t seed = p.at("seed");
  const Image noisy = apply_multiplicative_noise(s0, model, seed);
  const std::string out = p.at("output");
  std::size_t clamped = 0;
  write_image(noisy, out, p.value("maxval", 255), &clamped);
  if (clamped > 0)
    std::cerr << "warning: " << clamped << " pixels clamped on save\n";
  write_manifest("simulate", p, seed, {p.at("input")}, {out},
                 p.value("manifest", out + ".manifest.json"));
  return 0;
}

json report_to_json(const DenoiseReport& r) {
  json j;
  j["input"] = {{"rows", r.rows}, {"cols", r.cols},   {"min", r.input_min},
                {"max", r.input_max}, {"mean", r.input_mean}};
  j["model"] = {{"looks", r.looks}, {"mu", r.mu}};
  j["method"] = r.method;
  j["params"] = {{"threshold", r.threshold}, {"gamma", r.gamma},
                 {"lambda0", r.lambda0},     {"lambda1", r.lambda1},
                 {"beta", r.beta},           {"relaxation", r.relaxation},
                 {"n_dr", r.n_dr},           {"n_fb", r.n_fb},
                 {"levels", r.levels}};
  j["seconds"] = r.seconds;
  if (!r.trace_path.empty()) j["trace"] = r.trace_path;
  if (r.has_truth) {
    j["metrics"] = {{"psnr_noisy", r.psnr_noisy},
                    {"psnr_denoised", r.psnr_denoised},
                    {"mae_noisy", r.mae_noisy},
                    {"mae_denoised", r.mae_denoised}};
  }
  return j;
}

// Core of `denoise` and of each sweep cell.
Image denoise_dispatch(const Image& s, const json& p, DenoiseReport& report,
                       SolveTrace* trace) {
  const NoiseModel model(p.at("looks"), p.at("mu"));
  const std::string method = p.at("method");
  const double t_over_sigma = p.at("t_over_sigma");
  const double threshold = default_threshold(model, t_over_sigma);

  report.rows = s.rows();
  report.cols = s.cols();
  report.input_min = *std::min_element(s.pixels().begin(), s.pixels().end());
  report.input_max = norm_inf(s);
  report.input_mean = mean(s);
  report.looks = model.looks;
  report.mu = model.mean;
  report.method = method;
  report.threshold = threshold;
  report.levels = p.at("levels");

  TvProxConfig tv{p.at("beta"), p.at("n_fb")};
  report.beta = tv.beta;
  report.n_fb = tv.n_inner;

  const auto t0 = std::chrono::steady_clock::now();
  Image out(1, 1);
  if (method == "l1frame-tv") {
    TightFrame frame(p.at("levels"));
    SolverConfig cfg;
    cfg.gamma = p.at("gamma");
    cfg.relaxation = p.at("relaxation");
    cfg.n_dr = p.at("n_dr");
    cfg.weights = LambdaWeights{p.at("lambda0"), p.at("lambda1")};
    cfg.tv = tv;
    cfg.record_trace = trace != nullptr;
    report.gamma = cfg.gamma;
    report.lambda0 = cfg.weights.lambda0;
    report.lambda1 = cfg.weights.lambda1;
    report.relaxation = cfg.relaxation;
    report.n_dr = cfg.n_dr;
    out = denoise(s, model, frame, cfg, threshold, trace);
  } else if (method == "l2tv") {
    out = denoise_l2tv(s, model, p.at("rho"), tv);
  } else if (method == "hard") {
    TightFrame frame(p.at("levels"));
    out = denoise_hardthreshold(s, model, frame, threshold);
  } else {
    throw std::runtime_error("unknown method: " + method);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

int run_denoise(const json& p) {
  const Image s = load_positive_image(p.at("input"));
  DenoiseReport report;
  SolveTrace trace;
  const bool want_trace = p.contains("trace") && p.at("method") == "l1frame-tv";
  Image out = denoise_dispatch(s, p, report, want_trace ? &trace : nullptr);

  if (p.contains("truth")) {
    const Image truth = read_image(p.at("truth"));
    report.has_truth = true;
    report.psnr_noisy = psnr(truth, s);
    report.mae_noisy = mae(truth, s);
    report.psnr_denoised = psnr(truth, out);
    report.mae_denoised = mae(truth, out);
  }

  const std::string out_path = p.at("output");
  std::size_t clamped = 0;
  write_image(out, out_path, p.value("maxval", 255), &clamped);
  if (clamped > 0)
    std::cerr << "warning: " << clamped << " pixels clamped on save\n";

  std::vector<std::string> outputs{out_path};
  if (want_trace) {
    const std::string tp = p.at("trace");
    std::ofstream os(tp);
    if (!os) throw std::runtime_error("cannot write trace: " + tp);
    trace.write_csv(os);
    report.trace_path = tp;
    outputs.push_back(tp);
  }

  const std::string report_path = p.value("report", out_path + ".report.json");
  {
    std::ofstream os(report_path);
    if (!os) throw std::runtime_error("cannot write report: " + report_path);
    os << report_to_json(report).dump(2) << '\n';
  }
  outputs.push_back(report_path);

  std::vector<std::string> inputs{p.at("input")};
  if (p.contains("truth")) inputs.push_back(p.at("truth"));
  write_manifest("denoise", p, p.value("seed", std::uint64_t{0}), inputs, outputs,
                 p.value("manifest", out_path + ".manifest.json"));
  if (report.has_truth)
    std::cout << "PSNR: " << report.psnr_denoised
              << " dB (noisy " << report.psnr_noisy << " dB), MAE: "
              << report.mae_denoised << '\n';
  return 0;
}

int run_phantom(const json& p) {
  const Image im = phantom(p.at("rows"), p.at("cols"));
  const std::string out = p.at("output");
  write_image(im, out, p.value("maxval", 255));
  write_manifest("phantom", p, 0, {}, {out},
                 p.value("manifest", out + ".manifest.json"));
  return 0;
}

int run_eval(const json& p) {
  const Image truth = read_image(p.at("truth"));
  const Image cand = read_image(p.at("candidate"));
  const double v = psnr(truth, cand);
  std::cout << "PSNR: ";
  if (std::isinf(v))
    std::cout << "inf";
  else
    std::cout << v;
  std::cout << " dB, MAE: " << mae(truth, cand) << '\n';
  return 0;
}

// Grid spec: "key=v1,v2,...;key2=..." expanded as a cartesian product over
// denoise parameters.
std::vector<json> expand_grid(const std::string& spec, const json& base) {
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad grid axis (expected key=v1,v2,...): " + part);
    std::vector<double> values;
    std::stringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) values.push_back(std::stod(v));
    if (values.empty()) throw std::runtime_error("empty grid axis: " + part);
    axes.emplace_back(part.substr(0, eq), values);
  }
  if (axes.empty()) throw std::runtime_error("empty parameter grid");
  std::vector<json> cells{base};
  for (const auto& [key, values] : axes) {
    std::vector<json> next;
    for (const json& cell : cells) {
      for (double v : values) {
        json c = cell;
        if (key == "n_dr" || key == "n_fb" || key == "levels" || key == "looks")
          c[key] = static_cast<int>(v);
        else
          c[key] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

int run_sweep(const json& p) {
  const Image clean = load_positive_image(p.at("input"));
  const NoiseModel model(p.at("looks"), p.at("mu"));
  const std::uint64_t seed = p.at("seed");
  const Image noisy = apply_multiplicative_noise(clean, model, seed);

  const std::string outdir = p.at("output_dir");
  std::filesystem::create_directories(outdir);
  const std::vector<json> cells = expand_grid(p.at("grid"), p);

  const std::string csv_path = (std::filesystem::path(outdir) / "sweep.csv").string();
  const bool fresh = !std::filesystem::exists(csv_path) ||
                     std::filesystem::file_size(csv_path) == 0;
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw std::runtime_error("cannot open sweep csv: " + csv_path);
  if (fresh)
    csv << "cell,method,looks,t_over_sigma,gamma,lambda0,lambda1,rho,psnr,mae,"
           "seconds,image\n";

  std::vector<std::string> outputs{csv_path};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    DenoiseReport rep;
    Image out = denoise_dispatch(noisy, cells[i], rep, nullptr);
    const std::string img_path =
        (std::filesystem::path(outdir) / ("cell_" + std::to_string(i) + ".pgm"))
            .string();
    write_image(out, img_path);
    csv << i << ',' << rep.method << ',' << rep.looks << ','
        << cells[i].at("t_over_sigma").get<double>() << ',' << rep.gamma << ','
        << rep.lambda0 << ',' << rep.lambda1 << ','
        << cells[i].value("rho", 0.0) << ',' << psnr(clean, out) << ','
        << mae(clean, out) << ',' << rep.seconds << ',' << img_path << '\n';
    csv.flush();
    outputs.push_back(img_path);
  }

  write_manifest("sweep", p, seed, {p.at("input")}, outputs,
                 p.value("manifest",
                         (std::filesystem::path(outdir) / "sweep.manifest.json")
                             .string()));
  return 0;
}

int run_replay(const std::string& manifest_path, const std::string& redirect) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot open manifest: " + manifest_path);
  json m = json::parse(is);
  json p = m.at("params");
  if (!redirect.empty()) {
    std::filesystem::create_directories(redirect);
    auto move_into = [&](const char* key) {
      if (p.contains(key)) {
        std::filesystem::path old(p.at(key).get<std::string>());
        p[key] = (std::filesystem::path(redirect) / old.filename()).string();
      }
    };
    move_into("output");
    move_into("manifest");
    move_into("report");
    move_into("trace");
    move_into("output_dir");
    if (!p.contains("manifest") && p.contains("output"))
      p["manifest"] = p.at("output").get<std::string>() + ".manifest.json";
  }
  const std::string command = m.at("command");
  if (command == "simulate") return run_simulate(p);
  if (command == "denoise") return run_denoise(p);
  if (command == "eval") return run_eval(p);
  if (command == "sweep") return run_sweep(p);
  if (command == "phantom") return run_phantom(p);
  throw std::runtime_error("manifest has unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative (speckle) noise toolkit"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------
  std::string sim_input, sim_output, sim_manifest;
  int sim_looks = 10;
  double sim_mu = 1.0;
  std::uint64_t sim_seed = 1;
  int sim_maxval = 255;
  auto* sim = app.add_subcommand("simulate", "Multiply an image by K-look Gamma speckle");
  sim->add_option("-i,--input", sim_input, "clean input image (PGM or raw-double)")
      ->required();
  sim->add_option("-o,--output", sim_output, "noisy output image")->required();
  sim->add_option("-K,--looks", sim_looks, "number of looks (>= 1)");
  sim->add_option("--mu", sim_mu, "mean of the speckle (> 0)");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--maxval", sim_maxval, "PGM maxval when writing .pgm");
  sim->add_option("--manifest", sim_manifest, "manifest path");

  // denoise -----------------------------------------------------------
  std::string den_input, den_output, den_truth, den_trace, den_report,
      den_manifest;
  std::string den_method = "l1frame-tv";
  int den_looks = 10, den_ndr = 50, den_nfb = 200, den_levels = 4,
      den_maxval = 255;
  double den_mu_noise = 1.0, den_gamma = 0.05, den_lambda0 = 1.0,
         den_lambda1 = 0.5, den_tsigma = 2.0, den_beta = 0.24, den_relax = 1.0,
         den_rho = 2.0;
  std::uint64_t den_seed = 0;
  auto* den = app.add_subcommand("denoise", "Remove multiplicative noise");
  den->add_option("-i,--input", den_input, "noisy input image")->required();
  den->add_option("-o,--output", den_output, "denoised output image")->required();
  den->add_option("-m,--method", den_method, "l1frame-tv | l2tv | hard")
      ->check(CLI::IsMember({"l1frame-tv", "l2tv", "hard"}));
  den->add_option("-K,--looks", den_looks, "number of looks (>= 1)");
  den->add_option("--noise-mu", den_mu_noise, "speckle mean (metadata only)");
  den->add_option("--gamma", den_gamma, "proximal stepsize (> 0)");
  den->add_option("--lambda0", den_lambda0, "fidelity weight on zeroed coefficients");
  den->add_option("--lambda1", den_lambda1, "fidelity weight on kept coefficients");
  den->add_option("-T,--t-over-sigma", den_tsigma, "threshold in units of sigma");
  den->add_option("--n-dr", den_ndr, "outer Douglas-Rachford iterations");
  den->add_option("--n-fb", den_nfb, "inner forward-backward iterations");
  den->add_option("--beta", den_beta, "inner stepsize, must be < 1/4");
  den->add_option("--mu", den_relax, "relaxation, must be in (0,2)");
  den->add_option("--levels", den_levels, "frame decomposition levels");
  den->add_option("--rho", den_rho, "fidelity weight for method=l2tv");
  den->add_option("--seed", den_seed, "recorded in the manifest");
  den->add_option("--truth", den_truth, "ground truth for PSNR/MAE");
  den->add_option("--trace", den_trace, "write per-iteration CSV here");
  den->add_option("--report", den_report, "report JSON path");
  den->add_option("--manifest", den_manifest, "manifest path");
  den->add_option("--maxval", den_maxval, "PGM maxval when writing .pgm");

  // eval ----------------------------------------------------------------
  std::string ev_truth, ev_cand;
  auto* ev = app.add_subcommand("eval", "PSNR and MAE between two images");
  ev->add_option("truth", ev_truth, "reference image")->required();
  ev->add_option("candidate", ev_cand, "image under test")->required();

  // phantom -------------------------------------------------------------
  std::string ph_output, ph_manifest;
  int ph_rows = 128, ph_cols = 128, ph_maxval = 255;
  auto* ph = app.add_subcommand("phantom", "Write the built-in piecewise-constant test image");
  ph->add_option("-o,--output", ph_output, "output image")->required();
  ph->add_option("--rows", ph_rows, "image rows");
  ph->add_option("--cols", ph_cols, "image columns");
  ph->add_option("--maxval", ph_maxval, "PGM maxval when writing .pgm");

  // sweep ---------------------------------------------------------------
  std::string sw_input, sw_outdir, sw_grid, sw_manifest;
  std::string sw_method = "hard";
  int sw_looks = 10, sw_ndr = 50, sw_nfb = 200, sw_levels = 4;
  double sw_mu = 1.0, sw_gamma = 0.05, sw_lambda0 = 1.0, sw_lambda1 = 0.5,
         sw_tsigma = 2.0, sw_beta = 0.24, sw_relax = 1.0, sw_rho = 2.0;
  std::uint64_t sw_seed = 1;
  auto* sw = app.add_subcommand("sweep", "Run a parameter grid and collect metrics");
  sw->add_option("-i,--input", sw_input, "clean input image")->required();
  sw->add_option("-d,--output-dir", sw_outdir, "directory for CSV and images")
      ->required();
  sw->add_option("-g,--grid", sw_grid,
                 "grid spec, e.g. \"t_over_sigma=2,3,4,5,6,8\"")
      ->required();
  sw->add_option("-m,--method", sw_method, "method for every cell")
      ->check(CLI::IsMember({"l1frame-tv", "l2tv", "hard"}));
  sw->add_option("-K,--looks", sw_looks, "number of looks");
  sw->add_option("--mu", sw_mu, "speckle mean");
  sw->add_option("--seed", sw_seed, "noise realization seed");
  sw->add_option("--gamma", sw_gamma, "proximal stepsize");
  sw->add_option("--lambda0", sw_lambda0, "fidelity weight on zeroed coefficients");
  sw->add_option("--lambda1", sw_lambda1, "fidelity weight on kept coefficients");
  sw->add_option("-T,--t-over-sigma", sw_tsigma, "threshold in units of sigma");
  sw->add_option("--n-dr", sw_ndr, "outer iterations");
  sw->add_option("--n-fb", sw_nfb, "inner iterations");
  sw->add_option("--beta", sw_beta, "inner stepsize");
  sw->add_option("--rho", sw_rho, "fidelity weight for l2tv cells");
  sw->add_option("--levels", sw_levels, "frame decomposition levels");
  sw->add_option("--manifest", sw_manifest, "manifest path");

  // replay --------------------------------------------------------------
  std::string rp_manifest, rp_dir;
  auto* rp = app.add_subcommand("replay", "Re-run a recorded manifest");
  rp->add_option("manifest", rp_manifest, "manifest JSON")->required();
  rp->add_option("-d,--output-dir", rp_dir, "redirect outputs into this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim || *den || *sw) {
      // Bounds shared by the iterative commands.
      const int looks = *sim ? sim_looks : (*den ? den_looks : sw_looks);
      if (looks < 1) throw CLI::ValidationError("K must be >= 1");
    }
    if (*den || *sw) {
      const double beta = *den ? den_beta : sw_beta;
      const double relax = *den ? den_relax : sw_relax;
      const double gamma = *den ? den_gamma : sw_gamma;
      if (!(beta > 0.0 && beta < 0.25))
        throw CLI::ValidationError("beta must be < 1/4 (and > 0), got " +
                                   std::to_string(beta));
      if (!(relax > 0.0 && relax < 2.0))
        throw CLI::ValidationError("mu must be in (0,2), got " +
                                   std::to_string(relax));
      if (!(gamma > 0.0))
        throw CLI::ValidationError("gamma must be > 0, got " +
                                   std::to_string(gamma));
    }
    if (*sim && !(sim_mu > 0.0))
      throw CLI::ValidationError("mu must be > 0, got " + std::to_string(sim_mu));

    if (*sim) {
      json p = {{"input", sim_input},
                {"output", resolve_output(sim_output)},
                {"looks", sim_looks},
                {"mu", sim_mu},
                {"seed", sim_seed},
                {"maxval", sim_maxval}};
      if (!sim_manifest.empty()) p["manifest"] = resolve_output(sim_manifest);
      return run_simulate(p);
    }
    if (*den) {
      json p = {{"input", den_input},
                {"output", resolve_output(den_output)},
                {"method", den_method},
                {"looks", den_looks},
                {"mu", den_mu_noise},
                {"gamma", den_gamma},
                {"lambda0", den_lambda0},
                {"lambda1", den_lambda1},
                {"t_over_sigma", den_tsigma},
                {"n_dr", den_ndr},
                {"n_fb", den_nfb},
                {"beta", den_beta},
                {"relaxation", den_relax},
                {"levels", den_levels},
                {"rho", den_rho},
                {"seed", den_seed},
                {"maxval", den_maxval}};
      if (!den_truth.empty()) p["truth"] = den_truth;
      if (!den_trace.empty()) p["trace"] = resolve_output(den_trace);
      if (!den_report.empty()) p["report"] = resolve_output(den_report);
      if (!den_manifest.empty()) p["manifest"] = resolve_output(den_manifest);
      return run_denoise(p);
    }
    if (*ev) {
      json p = {{"truth", ev_truth}, {"candidate", ev_cand}};
      return run_eval(p);
    }
    if (*ph) {
      if (ph_rows < 1 || ph_cols < 1)
        throw CLI::ValidationError("phantom size must be >= 1x1");
      json p = {{"output", resolve_output(ph_output)},
                {"rows", ph_rows},
                {"cols", ph_cols},
                {"maxval", ph_maxval}};
      if (!ph_manifest.empty()) p["manifest"] = resolve_output(ph_manifest);
      return run_phantom(p);
    }
    if (*sw) {
      json p = {{"input", sw_input},
                {"output_dir", resolve_output(sw_outdir)},
                {"grid", sw_grid},
                {"method", sw_method},
                {"looks", sw_looks},
                {"mu", sw_mu},
                {"seed", sw_seed},
                {"gamma", sw_gamma},
                {"lambda0", sw_lambda0},
                {"lambda1", sw_lambda1},
                {"t_over_sigma", sw_tsigma},
                {"n_dr", sw_ndr},
                {"n_fb", sw_nfb},
                {"beta", sw_beta},
                {"relaxation", sw_relax},
                {"levels", sw_levels},
                {"rho", sw_rho}};
      if (!sw_manifest.empty()) p["manifest"] = resolve_output(sw_manifest);
      return run_sweep(p);
    }
    if (*rp) return run_replay(rp_manifest, rp_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
