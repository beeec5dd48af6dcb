#include "sparsepair/synth.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sparsepair/numerics.hpp"
#include "sparsepair/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset container assumes a little-endian host");

namespace sparsepair {

std::vector<ClassId> LabeledDataset::distinct_classes() const {
  std::set<ClassId> seen(labels.begin(), labels.end());
  return {seen.begin(), seen.end()};
}

namespace {

constexpr char kMagic[5] = {'S', 'P', 'D', 'S', '1'};

RealVector random_unit(Rng& rng, Index dim) {
  RealVector v(dim);
  double norm = 0.0;
  do {
    for (Index i = 0; i < dim; ++i) v[i] = rng.gaussian();
    norm = v.norm();
  } while (norm <= 1e-12);
  return v / norm;
}

RealVector noisy_point(Rng& rng, const RealVector& mean, double sigma) {
  RealVector p = mean;
  for (Index i = 0; i < p.size(); ++i) p[i] += sigma * rng.gaussian();
  const double norm = p.norm();
  if (norm <= 1e-12) return mean;  // essentially impossible; keep total order
  return p / norm;
}

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("dataset file truncated");
  return v;
}

}  // namespace

LabeledDataset generate(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.rng_seed, "synthgen"));
  const Index rows = spec.num_classes * spec.per_class;
  const double sigma = 1.0 / std::sqrt(spec.concentration);
  const Index outliers_per_class = static_cast<Index>(
      spec.outlier_fraction * static_cast<double>(spec.per_class) + 0.5);

  LabeledDataset ds;
  ds.points.resize(rows, spec.dim);
  ds.labels.resize(static_cast<std::size_t>(rows));
  ds.harmful_mask.assign(static_cast<std::size_t>(rows), false);

  Index r = 0;
  for (Index c = 0; c < spec.num_classes; ++c) {
    const RealVector mean = random_unit(rng, spec.dim);
    for (Index i = 0; i < spec.per_class; ++i, ++r) {
      // the trailing outliers_per_class rows of each class get the wide noise
      const bool outlier = i >= spec.per_class - outliers_per_class;
      const double s = outlier ? sigma * spec.outlier_spread : sigma;
      ds.points.row(r) = noisy_point(rng, mean, s).transpose();
      ds.labels[static_cast<std::size_t>(r)] = static_cast<ClassId>(c);
      ds.harmful_mask[static_cast<std::size_t>(r)] = outlier;
    }
  }
  return ds;
}

void save(const LabeledDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_raw(os, static_cast<std::uint32_t>(ds.size()));
  write_raw(os, static_cast<std::uint32_t>(ds.dim()));
  os.write(reinterpret_cast<const char*>(ds.points.data()),
           static_cast<std::streamsize>(sizeof(double)) * ds.size() * ds.dim());
  for (const ClassId label : ds.labels) write_raw(os, label);
  for (const bool h : ds.harmful_mask)
    write_raw(os, static_cast<std::uint8_t>(h ? 1 : 0));
  if (!os) throw IoError("write failed: " + path);
}

LabeledDataset load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("bad magic in " + path);
  const auto rows = read_raw<std::uint32_t>(is);
  const auto dim = read_raw<std::uint32_t>(is);
  if (dim == 0 || rows == 0) throw FormatError("degenerate shape in " + path);

  LabeledDataset ds;
  ds.points.resize(static_cast<Index>(rows), static_cast<Index>(dim));
  is.read(reinterpret_cast<char*>(ds.points.data()),
          static_cast<std::streamsize>(sizeof(double)) * rows * dim);
  if (!is) throw FormatError("dataset file truncated");
  ds.labels.resize(rows);
  for (auto& label : ds.labels) label = read_raw<ClassId>(is);
  ds.harmful_mask.resize(rows);
  for (std::uint32_t i = 0; i < rows; ++i)
    ds.harmful_mask[i] = read_raw<std::uint8_t>(is) != 0;
  return ds;
}

void save_json(const LabeledDataset& ds, const std::string& path) {
  nlohmann::json j;
  j["rows"] = ds.size();
  j["dim"] = ds.dim();
  auto& points = j["points"] = nlohmann::json::array();
  for (Index r = 0; r < ds.size(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < ds.dim(); ++c) row.push_back(ds.points(r, c));
    points.push_back(std::move(row));
  }
  j["labels"] = ds.labels;
  std::vector<int> mask(ds.harmful_mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = ds.harmful_mask[i] ? 1 : 0;
  j["harmful_mask"] = mask;

  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace sparsepair
