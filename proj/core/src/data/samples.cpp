#include "tasktcn/data/samples.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "tasktcn/common/errors.hpp"
#include "tasktcn/common/hash.hpp"
#include "tasktcn/data/csv.hpp"
#include "tasktcn/data/preprocess.hpp"

namespace tasktcn::data {

using autodiff::Tensor;

SampleSet SampleSet::subset(std::span<const std::size_t> positions) const {
  const std::size_t f = num_features(), t = day_len();
  SampleSet out;
  out.x = Tensor<float>({positions.size(), f, t});
  out.y = Tensor<float>({positions.size(), t});
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::size_t p = positions[i];
    if (p >= size()) throw ContractViolation("sample position out of range");
    std::copy_n(x.data() + p * f * t, f * t, out.x.data() + i * f * t);
    std::copy_n(y.data() + p * t, t, out.y.data() + i * t);
    out.ids.push_back(ids[p]);
    out.record_index.push_back(record_index[p]);
  }
  return out;
}

SampleSet SampleSet::for_task(TaskId id) const {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < size(); ++i) {
    if (ids[i] == id) positions.push_back(i);
  }
  return subset(positions);
}

SampleSet SampleSet::concat(const SampleSet& a, const SampleSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.num_features() != b.num_features() || a.day_len() != b.day_len()) {
    throw ContractViolation("cannot concatenate sample sets of different shape");
  }
  const std::size_t f = a.num_features(), t = a.day_len(), n = a.size() + b.size();
  SampleSet out;
  std::vector<float> xs(a.x.values().begin(), a.x.values().end());
  xs.insert(xs.end(), b.x.values().begin(), b.x.values().end());
  std::vector<float> ys(a.y.values().begin(), a.y.values().end());
  ys.insert(ys.end(), b.y.values().begin(), b.y.values().end());
  out.x = Tensor<float>({n, f, t}, std::move(xs));
  out.y = Tensor<float>({n, t}, std::move(ys));
  out.ids = a.ids;
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  out.record_index = a.record_index;
  out.record_index.insert(out.record_index.end(), b.record_index.begin(), b.record_index.end());
  return out;
}

SampleSet make_samples(std::span<const ParkRecord> records, std::size_t day_len) {
  if (day_len == 0) throw ContractViolation("day length must be positive");
  std::size_t days = 0, f = records.empty() ? 0 : records.front().num_features();
  for (const auto& r : records) {
    if (r.length() % day_len != 0) {
      throw ContractViolation("park " + r.park_id + " does not hold whole days");
    }
    if (r.num_features() != f) throw ValidationError("parks disagree on feature count");
    days += r.length() / day_len;
  }
  SampleSet out;
  out.x = Tensor<float>({days, f, day_len});
  out.y = Tensor<float>({days, day_len});
  std::size_t n = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    for (std::size_t d = 0; d < r.length() / day_len; ++d, ++n) {
      for (std::size_t s = 0; s < day_len; ++s) {
        const std::size_t row = d * day_len + s;
        for (std::size_t c = 0; c < f; ++c) out.x[(n * f + c) * day_len + s] = r.feature(row, c);
        out.y[n * day_len + s] = r.power[row];
      }
      out.ids.push_back(r.task_id);
      out.record_index.push_back(k);
    }
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'T', 'T', 'C', 'N', 'R', 'E', 'C', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("truncated record cache", 0);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1u << 20)) throw ParseError("corrupt record cache", 0);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw ParseError("truncated record cache", 0);
  return s;
}

template <typename T>
void put_vector(std::ostream& os, const std::vector<T>& v) {
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> get_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (std::uint64_t{1} << 34) / sizeof(T)) throw ParseError("corrupt record cache", 0);
  std::vector<T> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw ParseError("truncated record cache", 0);
  return v;
}

}  // namespace

void save_records(const std::filesystem::path& path, std::span<const ParkRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(os, records.size());
  for (const auto& r : records) {
    put_string(os, r.park_id);
    put<std::uint32_t>(os, r.task_id.value);
    put<std::int32_t>(os, static_cast<std::int32_t>(r.split));
    put<std::int32_t>(os, r.cluster);
    put<std::uint64_t>(os, r.feature_names.size());
    for (const auto& name : r.feature_names) put_string(os, name);
    put_vector(os, r.timestamps);
    put_vector(os, r.features);
    put_vector(os, r.power);
  }
}

std::vector<ParkRecord> load_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw ParseError(path.string() + " is not a record cache", 0);
  }
  const auto count = get<std::uint64_t>(is);
  std::vector<ParkRecord> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    ParkRecord r;
    r.park_id = get_string(is);
    r.task_id = TaskId(get<std::uint32_t>(is));
    r.split = static_cast<Split>(get<std::int32_t>(is));
    r.cluster = get<std::int32_t>(is);
    const auto names = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < names; ++i) r.feature_names.push_back(get_string(is));
    r.timestamps = get_vector<std::int64_t>(is);
    r.features = get_vector<float>(is);
    r.power = get_vector<float>(is);
    r.check();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ParkRecord> prepare_dataset(const std::filesystem::path& dir, const DatasetSpec& spec,
                                        const std::filesystem::path& cache_dir) {
  spec.validate();
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InsufficientData("no park CSV files in " + dir.string());

  Fnv1a h;
  h.update(to_string(spec.kind));
  h.update_value(spec.raw_resolution);
  h.update_value(spec.target_resolution);
  h.update_value(spec.day_len);
  h.update(spec.timestamp_column);
  h.update(spec.power_column);
  for (const auto& c : spec.feature_columns) h.update(c);
  for (const auto& file : files) {
    h.update(file.filename().string());
    std::ifstream in(file, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    h.update(bytes);
  }
  std::filesystem::path cache_file;
  if (!cache_dir.empty()) {
    cache_file = cache_dir / ("records-" + to_hex(h.digest()) + ".bin");
    if (std::filesystem::exists(cache_file)) return load_records(cache_file);
  }

  std::vector<ParkRecord> records;
  for (std::size_t k = 0; k < files.size(); ++k) {
    ParkRecord r = load_park_csv(files[k], spec);
    r = interpolate_linear(r, spec.raw_resolution, spec.target_resolution);
    r = filter_complete_days(r, spec.day_len);
    if (r.length() == 0) std::fprintf(stderr, "warning: %s has no complete day\n", r.park_id.c_str());
    r.task_id = TaskId(static_cast<std::uint32_t>(k + 1));
    records.push_back(std::move(r));
  }
  if (!cache_file.empty()) {
    std::filesystem::create_directories(cache_dir);
    save_records(cache_file, records);
  }
  return records;
}

}  // namespace tasktcn::data
