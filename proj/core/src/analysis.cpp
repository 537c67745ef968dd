#include "auxcodec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "auxcodec/codec.hpp"
#include "auxcodec/error.hpp"
#include "auxcodec/image.hpp"

namespace auxcodec::analysis {
namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    cells.push_back(cell);
  }
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kParse, "cannot parse number '" + s + "' in " + where);
  }
}

// Natural spline second derivatives by the Thomas algorithm.
std::vector<double> second_derivatives(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    const double a = h0 / 6.0;
    const double b = (h0 + h1) / 3.0;
    const double cc = h1 / 6.0;
    const double rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (rhs - a * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = d[i] - c[i] * m[i + 1];
  }
  return m;
}

bool has_relu(const Model& model) {
  const auto& c = model.config;
  return c.main_activation == mainbranch::Activation::kRelu ||
         (c.aux_analysis && c.aux_relu);
}

}  // namespace

double EnergyReport::total() const noexcept {
  return std::accumulate(per_channel_energy.begin(), per_channel_energy.end(),
                         0.0);
}

double EnergyReport::top_fraction_ratio(double fraction) const {
  const int c = static_cast<int>(per_channel_energy.size());
  if (c == 0) return 0.0;
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::kDomain, "fraction must lie in [0, 1]");
  }
  const int k = std::clamp(
      static_cast<int>(std::floor(fraction * c + 1e-9)), 1, c);
  const double t = total();
  if (t == 0.0) return static_cast<double>(k) / c;
  double top = 0.0;
  for (int i = 0; i < k; ++i) top += per_channel_energy[order[i]];
  return k == c ? 1.0 : top / t;
}

double EnergyReport::l2_norm(int channel) const {
  return std::sqrt(per_channel_energy.at(channel));
}

EnergyReport channel_energy(const Tensor& latent) {
  return channel_energy(std::span<const Tensor>(&latent, 1));
}

EnergyReport channel_energy(std::span<const Tensor> latents) {
  EnergyReport r;
  if (latents.empty()) return r;
  const int c = latents.front().channels();
  r.per_channel_energy.assign(c, 0.0);
  for (const auto& t : latents) {
    if (t.channels() != c) {
      fail(ErrorKind::kDimension, "latents disagree on channel count");
    }
    std::vector<double> e(c, 0.0);
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) e[i % c] += v[i] * v[i];
    for (int k = 0; k < c; ++k) r.per_channel_energy[k] += e[k];
  }
  for (double& e : r.per_channel_energy) e /= static_cast<double>(latents.size());
  r.order.resize(c);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    return r.per_channel_energy[a] > r.per_channel_energy[b];
  });
  const int base = c / kGroups;
  for (int i = 0; i < c; ++i) {
    const int g = std::min(i / std::max(base, 1), kGroups - 1);
    r.group_totals[base == 0 ? kGroups - 1 : g] += r.per_channel_energy[r.order[i]];
  }
  return r;
}

BranchEnergy branch_energy(const Model& model, std::span<const Tensor> images) {
  BranchEnergy b;
  if (images.empty()) return b;
  const double n = static_cast<double>(images.size());
  for (const auto& img : images) {
    const auto padded = image::pad_reflect(img, model.config.size_multiple()).first;
    const AnalysisOutput a = analyze(model, padded);
    const double aux = a.p_final.empty() ? 0.0 : a.p_final.energy();
    const double main = a.f.energy();
    const double total = a.y.energy();
    b.aux_energy += aux / n;
    b.main_energy += main / n;
    b.total += total / n;
    b.cross += (total - aux - main) / n;
  }
  return b;
}

std::vector<double> EffectiveOperator::apply(const Tensor& x) const {
  if (static_cast<int>(x.size()) != op.cols()) {
    fail(ErrorKind::kDimension, "operator expects " + std::to_string(op.cols()) +
                                    " inputs, got " + x.shape_string());
  }
  std::vector<double> out = offset;
  auto v = x.values();
  for (int r = 0; r < op.rows(); ++r) {
    const double* row = op.row(r);
    double s = 0.0;
    for (int j = 0; j < op.cols(); ++j) s += row[j] * v[j];
    out[r] += s;
  }
  return out;
}

EffectiveOperator effective_operator(const Model& model, int patch) {
  if (has_relu(model)) {
    fail(ErrorKind::kUnsupportedConfig,
         "effective operator needs a linear analysis transform (no ReLU)");
  }
  const int m = model.config.size_multiple();
  if (patch == 0) patch = m;
  if (patch < m || patch % m != 0) {
    fail(ErrorKind::kDimension, "operator patch must be a multiple of " +
                                    std::to_string(m));
  }
  const int c = model.config.source_channels;
  EffectiveOperator e;
  e.patch = patch;
  e.latent_channels = model.config.latent_channels();
  Tensor probe(patch, patch, c);
  const Tensor base = analyze(model, probe).y;
  e.offset = base.storage();
  const int inputs = static_cast<int>(probe.size());
  e.op = Matrix(static_cast<int>(base.size()), inputs);
  for (int j = 0; j < inputs; ++j) {
    probe.storage()[j] = 1.0;
    const Tensor y = analyze(model, probe).y;
    probe.storage()[j] = 0.0;
    auto v = y.values();
    for (int r = 0; r < e.op.rows(); ++r) e.op(r, j) = v[r] - e.offset[r];
  }
  return e;
}

SimilarityHistogram pairwise_similarity(const Matrix& rows, int bins) {
  if (rows.rows() < 2) fail(ErrorKind::kUsage, "similarity needs >= 2 rows");
  if (bins < 1) fail(ErrorKind::kUsage, "similarity needs >= 1 bin");
  SimilarityHistogram h;
  std::vector<int> kept;
  std::vector<double> norms;
  for (int r = 0; r < rows.rows(); ++r) {
    double n = 0.0;
    for (int j = 0; j < rows.cols(); ++j) n += rows(r, j) * rows(r, j);
    if (n == 0.0) {
      ++h.excluded_rows;
      continue;
    }
    kept.push_back(r);
    norms.push_back(std::sqrt(n));
  }
  if (kept.size() < 2) {
    fail(ErrorKind::kDomain, "fewer than two non-zero rows");
  }
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      double dot = 0.0;
      const double* ra = rows.row(kept[a]);
      const double* rb = rows.row(kept[b]);
      for (int j = 0; j < rows.cols(); ++j) dot += ra[j] * rb[j];
      h.values.push_back(std::min(1.0, std::abs(dot) / (norms[a] * norms[b])));
    }
  }
  h.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) / bins;
  h.counts.assign(bins, 0);
  for (double v : h.values) {
    ++h.counts[std::min(static_cast<int>(v * bins), bins - 1)];
  }
  h.frequencies.resize(bins);
  for (int i = 0; i < bins; ++i) {
    h.frequencies[i] = static_cast<double>(h.counts[i]) / h.values.size();
  }
  return h;
}

bool RDCurve::validate(std::string* warning) const {
  if (points.size() < 4) {
    fail(ErrorKind::kUsage, "an R-D curve needs at least 4 points, got " +
                                std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].bpp > 0.0) || !std::isfinite(points[i].psnr_db)) {
      fail(ErrorKind::kUsage, "R-D points need positive bpp and finite PSNR");
    }
    if (i > 0 && !(points[i].bpp > points[i - 1].bpp)) {
      fail(ErrorKind::kUsage, "R-D curve bpp must be strictly increasing");
    }
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].psnr_db > points[i - 1].psnr_db)) {
      if (warning) *warning = "PSNR is not strictly increasing with bpp";
      return false;
    }
  }
  return true;
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x,
                                       std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size() || x_.size() < 2) {
    fail(ErrorKind::kDomain, "spline needs matching knots, at least 2");
  }
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) {
      fail(ErrorKind::kDomain, "spline knots must be strictly increasing");
    }
  }
  m_ = second_derivatives(x_, y_);
}

double NaturalCubicSpline::operator()(double t) const {
  const auto it = std::upper_bound(x_.begin() + 1, x_.end() - 1, t);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - t) / h;
  const double b = 1.0 - a;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double NaturalCubicSpline::integrate(double a, double b) const {
  if (a > b) return -integrate(b, a);
  const double tol = 1e-12 * std::max(1.0, hi() - lo());
  if (a < lo() - tol || b > hi() + tol) {
    fail(ErrorKind::kDomain, "integration bounds outside the spline range");
  }
  a = std::max(a, lo());
  b = std::min(b, hi());
  // Antiderivative on segment i as a function of t.
  auto anti = [&](std::size_t i, double t) {
    const double h = x_[i + 1] - x_[i];
    const double bb = (t - x_[i]) / h;
    const double aa = 1.0 - bb;
    return h * (-y_[i] * aa * aa / 2.0 + y_[i + 1] * bb * bb / 2.0 +
                h * h / 6.0 *
                    (-m_[i] * (aa * aa * aa * aa / 4.0 - aa * aa / 2.0) +
                     m_[i + 1] * (bb * bb * bb * bb / 4.0 - bb * bb / 2.0)));
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    const double s = std::max(a, x_[i]);
    const double e = std::min(b, x_[i + 1]);
    if (e > s) total += anti(i, e) - anti(i, s);
  }
  return total;
}

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  anchor.validate();
  test.validate();
  auto spline = [](const RDCurve& c) {
    std::vector<RDPoint> p = c.points;
    std::sort(p.begin(), p.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.psnr_db < b.psnr_db; });
    std::vector<double> x, y;
    for (const auto& q : p) {
      x.push_back(q.psnr_db);
      y.push_back(std::log10(q.bpp));
    }
    return NaturalCubicSpline(std::move(x), std::move(y));
  };
  const NaturalCubicSpline sa = spline(anchor);
  const NaturalCubicSpline st = spline(test);
  const double lo = std::max(sa.lo(), st.lo());
  const double hi = std::min(sa.hi(), st.hi());
  if (!(hi > lo)) {
    fail(ErrorKind::kDomain, "R-D curves do not overlap in PSNR");
  }
  const double diff = (st.integrate(lo, hi) - sa.integrate(lo, hi)) / (hi - lo);
  return (std::pow(10.0, diff) - 1.0) * 100.0;
}

RDCurve read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kUsage, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorKind::kParse, "'" + path.string() + "' is empty");
  }
  const auto header = split_csv(line);
  int bpp_col = -1, psnr_col = -1, name_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "bpp") bpp_col = static_cast<int>(i);
    if (header[i] == "psnr" || header[i] == "psnr_db") psnr_col = static_cast<int>(i);
    if (header[i] == "image" || header[i] == "name") name_col = static_cast<int>(i);
  }
  if (bpp_col < 0 || psnr_col < 0) {
    fail(ErrorKind::kParse, "'" + path.string() + "' needs bpp and psnr columns");
  }
  RDCurve c;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    const auto need = static_cast<std::size_t>(std::max(bpp_col, psnr_col));
    if (cells.size() <= need) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) +
                                  ": too few columns");
    }
    if (name_col >= 0 && static_cast<std::size_t>(name_col) < cells.size() &&
        cells[name_col] == "mean") {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    c.points.push_back({parse_double(cells[bpp_col], where),
                        parse_double(cells[psnr_col], where)});
  }
  std::sort(c.points.begin(), c.points.end(),
            [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
  return c;
}

std::vector<std::filesystem::path> analyze_checkpoint(
    const Model& model, const AnalyzeInputs& inputs,
    const std::filesystem::path& out_dir) {
  if (inputs.images.empty()) fail(ErrorKind::kUsage, "image set is empty");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const std::size_t n = inputs.images.size();
  auto name_of = [&](std::size_t i) {
    return i < inputs.names.size() ? inputs.names[i] : "image" + std::to_string(i);
  };

  // Latents and branch energies, one analysis pass per image.
  std::vector<Tensor> latents;
  std::vector<BranchEnergy> branches;
  for (const auto& img : inputs.images) {
    const auto padded = image::pad_reflect(img, model.config.size_multiple()).first;
    const AnalysisOutput a = analyze(model, padded);
    BranchEnergy b;
    b.aux_energy = a.p_final.empty() ? 0.0 : a.p_final.energy();
    b.main_energy = a.f.energy();
    b.total = a.y.energy();
    b.cross = b.total - b.aux_energy - b.main_energy;
    branches.push_back(b);
    latents.push_back(a.y);
  }

  const EnergyReport energy = channel_energy(latents);
  {
    const auto path = out_dir / "channel_energy.csv";
    auto out = open_csv(path);
    out << "rank,channel,energy,ratio,cum_ratio\n";
    const double total = energy.total();
    double cum = 0.0;
    for (std::size_t r = 0; r < energy.order.size(); ++r) {
      const int ch = energy.order[r];
      const double e = energy.per_channel_energy[ch];
      const double ratio = total > 0.0 ? e / total : 0.0;
      cum += ratio;
      out << r + 1 << ',' << ch << ',' << e << ',' << ratio << ',' << cum << '\n';
    }
    written.push_back(path);
  }

  BranchEnergy mean_branch;
  {
    const auto path = out_dir / "branch_energy.csv";
    auto out = open_csv(path);
    out << "image,aux_energy,main_energy,total,cross\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = branches[i];
      out << name_of(i) << ',' << b.aux_energy << ',' << b.main_energy << ','
          << b.total << ',' << b.cross << '\n';
      mean_branch.aux_energy += b.aux_energy / n;
      mean_branch.main_energy += b.main_energy / n;
      mean_branch.total += b.total / n;
      mean_branch.cross += b.cross / n;
    }
    out << "mean," << mean_branch.aux_energy << ',' << mean_branch.main_energy
        << ',' << mean_branch.total << ',' << mean_branch.cross << '\n';
    written.push_back(path);
  }

  std::optional<SimilarityHistogram> similarity;
  if (!has_relu(model)) {
    const EffectiveOperator e = effective_operator(model);
    // One functional per latent channel at the central latent position.
    const int side = e.patch / model.config.size_multiple();
    const int c = e.latent_channels;
    const int base = ((side / 2) * side + side / 2) * c;
    Matrix rows(c, e.op.cols());
    for (int r = 0; r < c; ++r) {
      std::copy_n(e.op.row(base + r), e.op.cols(), rows.row(r));
    }
    similarity = pairwise_similarity(rows);
    const auto path = out_dir / "similarity.csv";
    auto out = open_csv(path);
    out << "bin_lo,bin_hi,count,frequency\n";
    for (std::size_t i = 0; i < similarity->counts.size(); ++i) {
      out << similarity->edges[i] << ',' << similarity->edges[i + 1] << ','
          << similarity->counts[i] << ',' << similarity->frequencies[i] << '\n';
    }
    written.push_back(path);
  }

  double mean_bpp = 0.0;
  double mean_psnr = 0.0;
  {
    const auto path = out_dir / "rd.csv";
    auto out = open_csv(path);
    out << "image,bpp,psnr\n";
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor& img = inputs.images[i];
      image::ImageMeta meta;
      meta.original_height = img.height();
      meta.original_width = img.width();
      meta.color = img.channels() == 3 ? image::ColorModel::kRgb
                                       : image::ColorModel::kGray;
      const EncodedImage enc = encode_image(model, inputs.model_hash, img, meta);
      const DecodedImage dec = decode_image(model, inputs.model_hash, enc.bytes);
      const double p = image::psnr(to_pixel_grid(dec.image), img);
      out << name_of(i) << ',' << enc.bpp << ',' << p << '\n';
      mean_bpp += enc.bpp / n;
      mean_psnr += p / n;
    }
    out << "mean," << mean_bpp << ',' << mean_psnr << '\n';
    written.push_back(path);
  }

  if (inputs.group_log) {
    std::ifstream in(*inputs.group_log);
    if (!in) {
      fail(ErrorKind::kUsage,
           "cannot open group log '" + inputs.group_log->string() + "'");
    }
    const auto path = out_dir / "group_evolution.csv";
    auto out = open_csv(path);
    out << "iter";
    for (int g = 1; g <= kGroups; ++g) out << ",g" << g << "_ratio";
    out << ",total\n";
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != kGroups + 2) {
        fail(ErrorKind::kParse, "group log rows need " +
                                    std::to_string(kGroups + 2) + " columns");
      }
      const std::string where = inputs.group_log->string();
      const double total = parse_double(cells.back(), where);
      out << cells[0];
      for (int g = 1; g <= kGroups; ++g) {
        const double v = parse_double(cells[g], where);
        out << ',' << (total > 0.0 ? v / total : 0.0);
      }
      out << ',' << total << '\n';
    }
    written.push_back(path);
  }

  {
    const auto path = out_dir / "summary.txt";
    auto out = open_csv(path);
    out << "model_hash " << std::hex << std::setw(16) << std::setfill('0')
        << inputs.model_hash << std::dec << std::setfill(' ') << '\n';
    out << "images " << n << '\n';
    out << "mean_bpp " << mean_bpp << '\n';
    out << "mean_psnr " << mean_psnr << '\n';
    out << "latent_channels " << energy.per_channel_energy.size() << '\n';
    out << "top10_ratio " << energy.top_fraction_ratio(0.1) << '\n';
    out << "aux_energy " << mean_branch.aux_energy << '\n';
    out << "main_energy " << mean_branch.main_energy << '\n';
    out << "total_energy " << mean_branch.total << '\n';
    if (similarity) {
      const auto& v = similarity->values;
      const double mean =
          std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      out << "mean_similarity " << mean << '\n';
      out << "excluded_rows " << similarity->excluded_rows << '\n';
    } else {
      out << "mean_similarity n/a (nonlinear analysis transform)\n";
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace auxcodec::analysis
