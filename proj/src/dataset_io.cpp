#include "noiseforge/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

namespace noiseforge {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'G', 'N', 'F'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b)
    out.push_back(static_cast<char>((value >> (8 * b)) & 0xFFu));
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    value |= static_cast<T>(p[b]) << (8 * b);
  return value;
}

std::string path_context(const std::filesystem::path& path) {
  return " (" + path.string() + ")";
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void expect_columns(const IntegerTable& table,
                    std::initializer_list<std::string_view> expected,
                    const std::filesystem::path& path) {
  const bool match =
      table.columns.size() == expected.size() &&
      std::equal(expected.begin(), expected.end(), table.columns.begin());
  if (!match) {
    std::string want;
    for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
    throw DataError("expected CSV header `" + want + "`" + path_context(path));
  }
}

ClassId checked_label(std::uint64_t value, std::size_t n_classes, std::size_t row,
                      const std::filesystem::path& path) {
  if (value >= n_classes)
    throw DataError("label " + std::to_string(value) + " at row " +
                    std::to_string(row) + " is outside [0, " +
                    std::to_string(n_classes) + ")" + path_context(path));
  return static_cast<ClassId>(value);
}

// Maps each row's index column to a dense position 0..N-1, rejecting
// duplicates and gaps.
std::vector<std::size_t> dense_positions(const IntegerTable& table,
                                         const std::filesystem::path& path) {
  const std::size_t n = table.rows.size();
  std::vector<std::size_t> position(n);
  std::vector<bool> seen(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto index = table.rows[r][0];
    if (index >= n)
      throw DataError("index " + std::to_string(index) + " is outside [0, " +
                      std::to_string(n) + "): indices must be 0..N-1" +
                      path_context(path));
    if (seen[index])
      throw DataError("duplicate index " + std::to_string(index) + path_context(path));
    seen[index] = true;
    position[r] = static_cast<std::size_t>(index);
  }
  return position;
}

struct SubsetRows {
  std::vector<std::size_t> indices;
  std::vector<ClassId> clean;
  std::vector<ClassId> noisy;
};

SubsetRows read_subset_rows(const std::filesystem::path& path, std::size_t n_classes) {
  const auto table = read_integer_csv(path);
  expect_columns(table, {"index", "clean_label", "noisy_label"}, path);
  SubsetRows rows;
  const std::size_t n = table.rows.size();
  rows.indices.resize(n);
  rows.clean.resize(n);
  rows.noisy.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    rows.indices[r] = static_cast<std::size_t>(table.rows[r][0]);
    rows.clean[r] = checked_label(table.rows[r][1], n_classes, r + 1, path);
    rows.noisy[r] = checked_label(table.rows[r][2], n_classes, r + 1, path);
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing" + path_context(path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed" + path_context(path));
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t n_samples, std::size_t dim,
                             std::vector<float> data)
    : n_samples_(n_samples), dim_(dim), data_(std::move(data)) {
  if (n_samples_ == 0 || dim_ == 0)
    throw DataError("feature matrix needs n_samples >= 1 and dim >= 1");
  if (data_.size() != n_samples_ * dim_)
    throw DataError("feature payload holds " + std::to_string(data_.size()) +
                    " values, expected " + std::to_string(n_samples_ * dim_));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i]))
      throw DataError("non-finite feature value at sample " +
                      std::to_string(i / dim_) + ", coordinate " +
                      std::to_string(i % dim_));
  }
}

FeatureMatrix FeatureMatrix::gather(std::span<const std::size_t> rows) const {
  std::vector<float> out;
  out.reserve(rows.size() * dim_);
  for (auto r : rows) {
    if (r >= n_samples_)
      throw DataError("row " + std::to_string(r) + " outside feature matrix of " +
                      std::to_string(n_samples_) + " samples");
    const auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return FeatureMatrix(rows.size(), dim_, std::move(out));
}

LabelVector::LabelVector(std::vector<ClassId> labels_in, std::size_t n_classes_in)
    : labels(std::move(labels_in)), n_classes(n_classes_in) {
  if (n_classes == 0) throw ConfigError("class count must be at least 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes)
      throw DataError("label " + std::to_string(labels[i]) + " at position " +
                      std::to_string(i) + " is outside [0, " +
                      std::to_string(n_classes) + ")");
  }
}

std::vector<std::size_t> LabelVector::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : labels) ++counts[y];
  return counts;
}

LabeledDataset::LabeledDataset(FeatureMatrix features, LabelVector clean_labels)
    : features_(std::move(features)), labels_(std::move(clean_labels)) {
  if (labels_.size() != features_.n_samples())
    throw DataError("label count " + std::to_string(labels_.size()) +
                    " does not match feature rows " +
                    std::to_string(features_.n_samples()));
  counts_ = labels_.class_counts();
}

NoisySubset::NoisySubset(std::vector<std::size_t> indices, FeatureMatrix feats,
                         LabelVector clean, LabelVector noisy)
    : sample_indices(std::move(indices)),
      features(std::move(feats)),
      clean_labels(std::move(clean)),
      noisy_labels(std::move(noisy)) {
  if (clean_labels.size() != noisy_labels.size() ||
      clean_labels.n_classes != noisy_labels.n_classes)
    throw DataError("clean and noisy label vectors disagree in length or class count");
  if (clean_labels.size() != features.n_samples())
    throw DataError("subset has " + std::to_string(clean_labels.size()) +
                    " label rows but " + std::to_string(features.n_samples()) +
                    " feature rows");
  if (!sample_indices.empty()) {
    if (sample_indices.size() != clean_labels.size())
      throw DataError("subset index list length does not match its labels");
    auto sorted = sample_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw DataError("subset sample indices are not unique");
  }
}

std::size_t NoisySubset::disagreements() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i)
    n += clean_labels[i] != noisy_labels[i] ? 1 : 0;
  return n;
}

LabeledDataset NoisySubset::clean_dataset() const {
  return LabeledDataset(features, clean_labels);
}

IntegerTable read_integer_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open" + path_context(path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  IntegerTable table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = split_commas(line);
    if (table.columns.empty()) {
      for (auto f : fields) table.columns.emplace_back(f);
      continue;
    }
    if (fields.size() != table.columns.size())
      throw DataError("line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(table.columns.size()) + path_context(path));
    std::vector<std::uint64_t> row(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto field = fields[f];
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), row[f]);
      if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
        throw DataError("line " + std::to_string(line_no) + ": `" +
                        std::string(field) + "` is not a non-negative integer" +
                        path_context(path));
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw DataError("empty CSV file" + path_context(path));
  return table;
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open" + path_context(path));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes)
    throw DataError("feature file shorter than its " + std::to_string(kHeaderBytes) +
                    "-byte header" + path_context(path));
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw DataError("bad magic, expected RGNF" + path_context(path));
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kFeatureFormatVersion)
    throw DataError("unsupported feature format version " + std::to_string(version) +
                    path_context(path));
  const auto n = get_le<std::uint64_t>(bytes.data() + 8);
  const auto dim = get_le<std::uint32_t>(bytes.data() + 16);
  if (n == 0 || dim == 0)
    throw DataError("feature header declares an empty matrix" + path_context(path));

  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  if (n > payload / 4 / dim || payload != n * dim * 4)
    throw DataError("feature payload is " + std::to_string(payload) +
                    " bytes, header (N=" + std::to_string(n) + ", d=" +
                    std::to_string(dim) + ") requires " +
                    std::to_string(n * dim * 4) + path_context(path));

  std::vector<float> data(n * dim);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4)
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
  try {
    return FeatureMatrix(n, dim, std::move(data));
  } catch (const DataError& e) {
    throw DataError(e.what() + path_context(path));
  }
}

void write_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::string out;
  out.reserve(kHeaderBytes + m.data().size() * 4);
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kFeatureFormatVersion);
  put_le<std::uint64_t>(out, m.n_samples());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  write_text(path, out);
}

LabelVector read_labels(const std::filesystem::path& path, std::size_t n_classes) {
  const auto table = read_integer_csv(path);
  expect_columns(table, {"index", "label"}, path);
  const auto position = dense_positions(table, path);
  std::vector<ClassId> labels(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    labels[position[r]] = checked_label(table.rows[r][1], n_classes, r + 1, path);
  return LabelVector(std::move(labels), n_classes);
}

void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out += std::to_string(i) + ',' + std::to_string(labels[i]) + '\n';
  write_text(path, out);
}

std::size_t infer_class_count(const std::filesystem::path& path) {
  const auto table = read_integer_csv(path);
  if (table.columns.size() < 2 || table.columns[0] != "index")
    throw DataError("expected a label CSV starting with `index`" + path_context(path));
  std::uint64_t max_label = 0;
  for (const auto& row : table.rows)
    for (std::size_t f = 1; f < row.size() && f < 3; ++f)
      max_label = std::max(max_label, row[f]);
  return static_cast<std::size_t>(max_label) + 1;
}

NoisySubset read_noisy_subset(const std::filesystem::path& path, std::size_t n_classes,
                              const FeatureMatrix& features) {
  auto rows = read_subset_rows(path, n_classes);
  if (rows.indices.size() != features.n_samples())
    throw DataError("subset has " + std::to_string(rows.indices.size()) +
                    " rows but its feature matrix has " +
                    std::to_string(features.n_samples()) + path_context(path));
  IntegerTable index_only;
  index_only.rows.reserve(rows.indices.size());
  for (auto i : rows.indices) index_only.rows.push_back({i});
  const auto position = dense_positions(index_only, path);

  std::vector<ClassId> clean(rows.clean.size()), noisy(rows.noisy.size());
  for (std::size_t r = 0; r < position.size(); ++r) {
    clean[position[r]] = rows.clean[r];
    noisy[position[r]] = rows.noisy[r];
  }
  return NoisySubset({}, features, LabelVector(std::move(clean), n_classes),
                     LabelVector(std::move(noisy), n_classes));
}

NoisySubset read_noisy_subset_from_parent(const std::filesystem::path& path,
                                          std::size_t n_classes,
                                          const FeatureMatrix& parent) {
  auto rows = read_subset_rows(path, n_classes);
  if (rows.indices.empty()) throw DataError("subset is empty" + path_context(path));
  std::vector<std::size_t> order(rows.indices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return rows.indices[a] < rows.indices[b]; });

  std::vector<std::size_t> indices;
  std::vector<ClassId> clean, noisy;
  for (auto r : order) {
    if (rows.indices[r] >= parent.n_samples())
      throw DataError("subset index " + std::to_string(rows.indices[r]) +
                      " is outside the parent dataset of " +
                      std::to_string(parent.n_samples()) + " samples" + path_context(path));
    if (!indices.empty() && indices.back() == rows.indices[r])
      throw DataError("duplicate index " + std::to_string(rows.indices[r]) +
                      path_context(path));
    indices.push_back(rows.indices[r]);
    clean.push_back(rows.clean[r]);
    noisy.push_back(rows.noisy[r]);
  }
  auto features = parent.gather(indices);
  return NoisySubset(std::move(indices), std::move(features),
                     LabelVector(std::move(clean), n_classes),
                     LabelVector(std::move(noisy), n_classes));
}

std::pair<LabelVector, LabelVector> read_subset_labels(const std::filesystem::path& path,
                                                       std::size_t n_classes) {
  auto rows = read_subset_rows(path, n_classes);
  if (rows.indices.empty()) throw DataError("subset is empty" + path_context(path));
  std::vector<std::size_t> order(rows.indices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return rows.indices[a] < rows.indices[b]; });
  std::vector<ClassId> clean, noisy;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r > 0 && rows.indices[order[r]] == rows.indices[order[r - 1]])
      throw DataError("duplicate index " + std::to_string(rows.indices[order[r]]) +
                      path_context(path));
    clean.push_back(rows.clean[order[r]]);
    noisy.push_back(rows.noisy[order[r]]);
  }
  return {LabelVector(std::move(clean), n_classes), LabelVector(std::move(noisy), n_classes)};
}

void write_noisy_subset(const NoisySubset& subset, const std::filesystem::path& path) {
  std::string out = "index,clean_label,noisy_label\n";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto index = subset.sample_indices.empty() ? i : subset.sample_indices[i];
    out += std::to_string(index) + ',' + std::to_string(subset.clean_labels[i]) + ',' +
           std::to_string(subset.noisy_labels[i]) + '\n';
  }
  write_text(path, out);
}

}  // namespace noiseforge
