#include "bassl/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "bassl/errors.hpp"
#include "bassl/io.hpp"
#include "bassl/logging.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk format code assumes a little-endian host");

namespace bassl {

namespace {

constexpr char kMagic[4] = {'B', 'S', 'S', 'L'};
constexpr uint8_t kVersion = 1;

const std::set<std::string> kSplits = {"pretrain", "train", "val", "test"};

void write_movie_file(const MovieRecord& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out.write(kMagic, 4);
  io::write_u8(out, kVersion);
  io::write_u32(out, static_cast<uint32_t>(m.num_shots));
  io::write_u32(out, static_cast<uint32_t>(m.dim));
  out.write(reinterpret_cast<const char*>(m.embeddings.data()),
            static_cast<std::streamsize>(m.embeddings.size() * sizeof(float)));
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<float> read_movie_payload(std::ifstream& in, const std::string& id, size_t num_shots,
                                      size_t dim) {
  std::vector<float> data(num_shots * dim);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != data.size() * sizeof(float)) {
    const size_t have = 13 + static_cast<size_t>(std::max<std::streamsize>(in.gcount(), 0));
    throw DataError("truncated: embeddings for movie " + id + " (byte offset " +
                    std::to_string(have) + ")");
  }
  return data;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  if (!kSplits.count(corpus.split_tag)) {
    throw ConfigError("unknown split tag: " + corpus.split_tag);
  }
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["dim"] = corpus.dim;
  manifest["split"] = corpus.split_tag;
  manifest["movies"] = nlohmann::json::array();
  for (const auto& m : corpus.movies) {
    const std::string file = m.movie_id + ".bssl";
    write_movie_file(m, dir / file);
    nlohmann::json entry;
    entry["id"] = m.movie_id;
    entry["num_shots"] = m.num_shots;
    entry["file"] = file;
    if (m.labels) {
      auto idx = nlohmann::json::array();
      for (size_t i = 0; i < m.labels->size(); ++i)
        if ((*m.labels)[i]) idx.push_back(i);
      entry["labels"] = idx;
    } else {
      entry["labels"] = nullptr;
    }
    manifest["movies"].push_back(entry);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot open for write: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream min(manifest_path);
  if (!min) throw DataError("missing manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest parse error in " + manifest_path.string() + ": " + e.what());
  }

  Corpus corpus;
  try {
    corpus.dim = manifest.at("dim").get<size_t>();
    corpus.split_tag = manifest.at("split").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest missing field in " + manifest_path.string() + ": " + e.what());
  }
  if (!kSplits.count(corpus.split_tag)) {
    throw DataError("unknown split tag in manifest: " + corpus.split_tag);
  }
  if (corpus.dim == 0) throw DataError("manifest dim must be >= 1");

  std::set<std::string> seen_ids;
  for (const auto& entry : manifest.at("movies")) {
    MovieRecord m;
    size_t manifest_shots = 0;
    std::string file;
    try {
      m.movie_id = entry.at("id").get<std::string>();
      manifest_shots = entry.at("num_shots").get<size_t>();
      file = entry.at("file").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest movie entry malformed: " + std::string(e.what()));
    }
    if (!seen_ids.insert(m.movie_id).second) {
      throw DataError("duplicate movie id: " + m.movie_id);
    }
    if (manifest_shots == 0) throw DataError("movie " + m.movie_id + " has zero shots");

    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw DataError("cannot open embeddings for movie " + m.movie_id + ": " + file);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
      throw DataError("corrupt embeddings file for movie " + m.movie_id + " (bad magic)");
    }
    const uint8_t version = io::read_u8(in, "version for movie " + m.movie_id);
    if (version != kVersion) {
      throw DataError("unsupported embeddings version " + std::to_string(version) +
                      " for movie " + m.movie_id);
    }
    m.num_shots = io::read_u32(in, "num_shots for movie " + m.movie_id);
    m.dim = io::read_u32(in, "dim for movie " + m.movie_id);
    if (m.num_shots != manifest_shots) {
      throw DataError("shot count mismatch for movie " + m.movie_id + ": file says " +
                      std::to_string(m.num_shots) + ", manifest says " +
                      std::to_string(manifest_shots));
    }
    if (m.dim != corpus.dim) {
      throw DataError("dimension mismatch for movie " + m.movie_id + ": file says " +
                      std::to_string(m.dim) + ", manifest says " + std::to_string(corpus.dim));
    }
    m.embeddings = read_movie_payload(in, m.movie_id, m.num_shots, m.dim);
    for (size_t i = 0; i < m.embeddings.size(); ++i) {
      if (!std::isfinite(m.embeddings[i])) {
        throw DataError("non-finite embedding value in movie " + m.movie_id + " at row " +
                        std::to_string(i / m.dim) + ", col " + std::to_string(i % m.dim));
      }
    }

    const auto& labels = entry.at("labels");
    if (!labels.is_null()) {
      std::vector<uint8_t> vec(m.num_shots, 0);
      for (const auto& j : labels) {
        const long idx = j.get<long>();
        if (idx < 0 || static_cast<size_t>(idx) >= m.num_shots) {
          throw DataError("label index " + std::to_string(idx) + " out of range for movie " +
                          m.movie_id + " with " + std::to_string(m.num_shots) + " shots");
        }
        if (static_cast<size_t>(idx) == m.num_shots - 1) {
          throw DataError("movie " + m.movie_id + ": final shot labeled as boundary");
        }
        if (vec[idx]) throw DataError("duplicate label index " + std::to_string(idx) +
                                      " for movie " + m.movie_id);
        vec[idx] = 1;
      }
      m.labels = std::move(vec);
    }
    corpus.movies.push_back(std::move(m));
  }
  return corpus;
}

Window make_window(const MovieRecord& movie, long center, int K) {
  if (K < 1) throw ConfigError("window K must be >= 1");
  if (center < 0 || static_cast<size_t>(center) >= movie.num_shots) {
    throw ConfigError("window center " + std::to_string(center) + " out of range for movie " +
                      movie.movie_id);
  }
  const long n = static_cast<long>(movie.num_shots);
  Window w;
  w.movie_id = movie.movie_id;
  w.center = center;
  w.K = K;
  w.embeddings = Mat(2 * static_cast<size_t>(K) + 1, movie.dim);
  for (long off = -K; off <= K; ++off) {
    const long shot = std::clamp(center + off, 0L, n - 1);
    auto src = movie.row(static_cast<size_t>(shot));
    auto dst = w.embeddings.row(static_cast<size_t>(off + K));
    for (size_t d = 0; d < movie.dim; ++d) dst[d] = static_cast<double>(src[d]);
  }
  w.pad_left = static_cast<int>(std::max(0L, static_cast<long>(K) - center));
  w.pad_right = static_cast<int>(std::max(0L, center + K - (n - 1)));
  if (movie.labels) w.label = static_cast<int>((*movie.labels)[center]);
  return w;
}

std::vector<Window> make_windows(const MovieRecord& movie, int K) {
  std::vector<Window> out;
  out.reserve(movie.num_shots);
  for (size_t n = 0; n < movie.num_shots; ++n)
    out.push_back(make_window(movie, static_cast<long>(n), K));
  return out;
}

namespace {

std::vector<double> unit_gaussian_vec(Rng& rng, size_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.gaussian();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

double cos_of(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

std::string movie_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "movie_%04zu", i);
  return buf;
}

}  // namespace

Corpus generate_synthetic(const SynthConfig& cfg) {
  if (cfg.num_movies == 0) throw ConfigError("synthetic corpus needs at least one movie");
  if (cfg.scenes_per_movie.first > cfg.scenes_per_movie.second ||
      cfg.scenes_per_movie.first == 0) {
    throw ConfigError("scenes_per_movie range is empty");
  }
  if (cfg.shots_per_scene.first > cfg.shots_per_scene.second || cfg.shots_per_scene.first == 0) {
    throw ConfigError("shots_per_scene range is empty");
  }
  if (cfg.dim == 0) throw ConfigError("embedding dim must be >= 1");
  if (cfg.noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");

  Rng root(cfg.seed);
  Corpus corpus;
  corpus.dim = cfg.dim;
  corpus.split_tag = "train";
  constexpr double kAltSpread = 0.3;  // how far dialogue sub-prototypes sit from the scene mean

  for (size_t mi = 0; mi < cfg.num_movies; ++mi) {
    Rng mrng = root.split(mi);
    Rng len_rng = mrng.split("len");
    Rng proto_rng = mrng.split("proto");
    Rng noise_rng = mrng.split("noise");

    const size_t num_scenes = static_cast<size_t>(
        len_rng.range(static_cast<int64_t>(cfg.scenes_per_movie.first),
                      static_cast<int64_t>(cfg.scenes_per_movie.second)));

    std::vector<std::vector<double>> protos;
    size_t attempts = 0;
    while (protos.size() < num_scenes) {
      if (++attempts > 20000) {
        throw ConfigError("prototype separation " + std::to_string(cfg.prototype_separation) +
                          " infeasible for " + std::to_string(num_scenes) +
                          " scenes in dimension " + std::to_string(cfg.dim));
      }
      auto cand = unit_gaussian_vec(proto_rng, cfg.dim);
      bool ok = true;
      for (const auto& p : protos) {
        if (1.0 - cos_of(cand, p) < cfg.prototype_separation) {
          ok = false;
          break;
        }
      }
      if (ok) protos.push_back(std::move(cand));
    }

    MovieRecord m;
    m.movie_id = movie_name(mi);
    m.dim = cfg.dim;
    std::vector<uint8_t> labels;
    for (size_t s = 0; s < num_scenes; ++s) {
      const size_t len = static_cast<size_t>(
          len_rng.range(static_cast<int64_t>(cfg.shots_per_scene.first),
                        static_cast<int64_t>(cfg.shots_per_scene.second)));
      std::vector<std::vector<double>> bases;
      if (cfg.alternation) {
        for (int k = 0; k < 2; ++k) {
          auto dir = unit_gaussian_vec(proto_rng, cfg.dim);
          std::vector<double> sub(cfg.dim);
          double norm2 = 0.0;
          for (size_t d = 0; d < cfg.dim; ++d) {
            sub[d] = protos[s][d] + kAltSpread * dir[d];
            norm2 += sub[d] * sub[d];
          }
          const double inv = 1.0 / std::sqrt(norm2);
          for (auto& x : sub) x *= inv;
          bases.push_back(std::move(sub));
        }
      } else {
        bases.push_back(protos[s]);
      }
      for (size_t t = 0; t < len; ++t) {
        const auto& base = bases[t % bases.size()];
        for (size_t d = 0; d < cfg.dim; ++d) {
          const double v = base[d] + cfg.noise_sigma * noise_rng.gaussian();
          m.embeddings.push_back(static_cast<float>(v));
        }
        labels.push_back(0);
      }
      if (s + 1 < num_scenes) labels.back() = 1;
    }
    m.num_shots = labels.size();
    m.labels = std::move(labels);
    corpus.movies.push_back(std::move(m));
  }
  return corpus;
}

Mat augment_view(const Mat& embeddings, double sigma, double drop_rate, Rng& rng) {
  if (sigma < 0) throw ConfigError("augment sigma must be >= 0");
  if (drop_rate < 0 || drop_rate >= 1) throw ConfigError("augment drop_rate must be in [0,1)");
  Mat out = embeddings;
  if (sigma > 0) {
    for (auto& v : out.data) v += sigma * rng.gaussian();
  }
  if (drop_rate > 0) {
    for (auto& v : out.data) {
      if (rng.uniform() < drop_rate) v = 0.0;
    }
  }
  return out;
}

Mat movie_matrix(const MovieRecord& movie) {
  Mat out(movie.num_shots, movie.dim);
  for (size_t i = 0; i < movie.embeddings.size(); ++i)
    out.data[i] = static_cast<double>(movie.embeddings[i]);
  return out;
}

}  // namespace bassl
