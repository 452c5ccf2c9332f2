#pragma once

// On-disk grasp dataset: index.json (versioned, self-describing header),
// records.bin (fixed-width little-endian records) and blobs.bin (float32
// image excerpts keyed by record ordinal).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "replab/benchmark.hpp"

namespace replab {

namespace detail {

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

struct FieldSpec {
  const char* name;
  const char* type;
  int count;
};

// Record layout, in file order.
inline constexpr FieldSpec kRecordFields[] = {
    {"ordinal", "u64", 1},         {"cell_id", "i32", 1},        {"seed", "u64", 1},
    {"pose_xyzt", "f64", 4},       {"achieved_xyzt", "f64", 4},  {"label", "u8", 1},
    {"failure_reason", "u8", 1},   {"cluster_center", "f64", 3}, {"cluster_corr2", "f64", 3},
    {"cluster_points", "u32", 1},
};

inline int type_size(std::string_view t) {
  if (t == "u8") return 1;
  if (t == "i32" || t == "u32") return 4;
  return 8;
}

inline std::size_t record_size() {
  std::size_t n = 0;
  for (const auto& f : kRecordFields) n += static_cast<std::size_t>(type_size(f.type) * f.count);
  return n;
}

class ByteWriter {
public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<char> bytes;
};

class ByteReader {
public:
  explicit ByteReader(const char* p) : p_(p) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, p_, sizeof(T));
    p_ += sizeof(T);
    return v;
  }

private:
  const char* p_;
};

inline void put_pose(ByteWriter& w, const GraspPose& g) {
  for (double v : {g.x, g.y, g.z, g.theta}) w.put(v);
}
inline GraspPose get_pose(ByteReader& r) {
  GraspPose g;
  g.x = r.get<double>();
  g.y = r.get<double>();
  g.z = r.get<double>();
  g.theta = r.get<double>();
  return g;
}

inline std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("benchmark", "cannot read '" + p.string() + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace detail

inline constexpr int kDatasetVersion = 1;

inline void write_dataset(const GraspDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t patch = d.spec.crop_size(), thumb = d.spec.thumb_size();
  nlohmann::ordered_json index;
  index["format"] = "replab-grasp-dataset";
  index["version"] = kDatasetVersion;
  index["count"] = d.size();
  index["record_size"] = detail::record_size();
  index["byte_order"] = "little";
  auto& fields = index["fields"] = nlohmann::ordered_json::array();
  for (const auto& f : detail::kRecordFields) fields.push_back({{"name", f.name}, {"type", f.type}, {"count", f.count}});
  index["blob"] = {{"dtype", "f32"},
                   {"patch", {{"values", patch}, {"crop", d.spec.crop}, {"stride_px", d.spec.crop_stride}}},
                   {"thumbnail", {{"values", thumb}, {"width", d.spec.thumb_width}, {"height", d.spec.thumb_height}}},
                   {"height_floor_cm", d.spec.height_floor}};
  index["theta_bins"] = d.spec.bins;

  detail::ByteWriter rec;
  std::ofstream blobs(dir / "blobs.bin", std::ios::binary);
  if (!blobs) throw IoError("benchmark", "cannot write dataset blobs in '" + dir.string() + "'");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const GraspRecord& r = d.records[i];
    rec.put(r.ordinal);
    rec.put(r.cell_id);
    rec.put(r.seed);
    detail::put_pose(rec, r.pose);
    detail::put_pose(rec, r.achieved);
    rec.put(r.label);
    rec.put(static_cast<std::uint8_t>(r.reason));
    for (double v : {r.cluster.center.x, r.cluster.center.y, r.cluster.center.z}) rec.put(v);
    for (double v : {r.cluster.corr2.xx, r.cluster.corr2.xy, r.cluster.corr2.yy}) rec.put(v);
    rec.put(r.cluster.points);
    if (d.patches[i].size() != patch || d.thumbnails[i].size() != thumb)
      throw InvalidArgument("benchmark", "dataset blob sizes do not match the feature spec");
    blobs.write(reinterpret_cast<const char*>(d.patches[i].data()), static_cast<std::streamsize>(patch * sizeof(float)));
    blobs.write(reinterpret_cast<const char*>(d.thumbnails[i].data()), static_cast<std::streamsize>(thumb * sizeof(float)));
  }
  std::ofstream records(dir / "records.bin", std::ios::binary);
  records.write(rec.bytes.data(), static_cast<std::streamsize>(rec.bytes.size()));
  std::ofstream idx(dir / "index.json");
  idx << index.dump(2) << "\n";
  if (!records || !idx || !blobs) throw IoError("benchmark", "failed writing dataset in '" + dir.string() + "'");
}

inline GraspDataset read_dataset(const std::filesystem::path& dir) {
  nlohmann::json index;
  {
    std::ifstream is(dir / "index.json");
    if (!is) throw IoError("benchmark", "no dataset index in '" + dir.string() + "'");
    try {
      is >> index;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("benchmark", std::string("malformed dataset index: ") + e.what());
    }
  }
  if (index.value("format", "") != "replab-grasp-dataset") throw IoError("benchmark", "not a grasp dataset");
  if (index.value("version", 0) != kDatasetVersion) throw IoError("benchmark", "unsupported dataset version");
  if (index.value("record_size", 0u) != detail::record_size()) throw IoError("benchmark", "record layout mismatch");
  GraspDataset d;
  d.spec.crop = index["blob"]["patch"]["crop"];
  d.spec.crop_stride = index["blob"]["patch"]["stride_px"];
  d.spec.thumb_width = index["blob"]["thumbnail"]["width"];
  d.spec.thumb_height = index["blob"]["thumbnail"]["height"];
  d.spec.height_floor = index["blob"]["height_floor_cm"];
  d.spec.bins = index["theta_bins"];
  const std::size_t count = index["count"];
  const std::vector<char> rec = detail::read_file(dir / "records.bin");
  const std::vector<char> blobs = detail::read_file(dir / "blobs.bin");
  const std::size_t patch = d.spec.crop_size(), thumb = d.spec.thumb_size();
  if (rec.size() != count * detail::record_size() || blobs.size() != count * (patch + thumb) * sizeof(float))
    throw IoError("benchmark", "dataset files are truncated or inconsistent with the index");
  for (std::size_t i = 0; i < count; ++i) {
    detail::ByteReader r(rec.data() + i * detail::record_size());
    GraspRecord g;
    g.ordinal = r.get<std::uint64_t>();
    g.cell_id = r.get<std::int32_t>();
    g.seed = r.get<std::uint64_t>();
    g.pose = detail::get_pose(r);
    g.achieved = detail::get_pose(r);
    g.label = r.get<std::uint8_t>();
    const auto reason = r.get<std::uint8_t>();
    if (reason > static_cast<std::uint8_t>(FailureReason::collision)) throw IoError("benchmark", "bad failure reason");
    g.reason = static_cast<FailureReason>(reason);
    g.cluster.center.x = r.get<double>();
    g.cluster.center.y = r.get<double>();
    g.cluster.center.z = r.get<double>();
    g.cluster.corr2.xx = r.get<double>();
    g.cluster.corr2.xy = r.get<double>();
    g.cluster.corr2.yy = r.get<double>();
    g.cluster.points = r.get<std::uint32_t>();
    d.records.push_back(g);
    const auto* b = reinterpret_cast<const float*>(blobs.data()) + i * (patch + thumb);
    d.patches.emplace_back(b, b + patch);
    d.thumbnails.emplace_back(b + patch, b + patch + thumb);
  }
  return d;
}

}  // namespace replab
