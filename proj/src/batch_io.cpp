// batch_io.cpp — Binary batch container

#include "corrfit/batch_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace corrfit::batch_io {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'C', 'Q', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
} // namespace

void write(const std::string& path, const TrajectoryBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("batch_io: cannot open " + path + " for writing");

    json header = {
        {"n_exp", batch.n_exp},
        {"n_detectors", batch.n_detectors},
        {"n_bins", batch.n_bins},
        {"bin_width", batch.bin_width},
        {"substeps_per_bin", batch.substeps_per_bin},
        {"seed", batch.seed},
        {"fingerprint", batch.fingerprint},
    };
    const std::string htext = header.dump();
    const std::uint64_t hlen = htext.size();

    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(hlen));
    out.write(reinterpret_cast<const char*>(batch.values.data()),
              static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("batch_io: write to " + path + " failed");
}

TrajectoryBatch read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("batch_io: cannot open " + path);

    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t hlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("batch_io: " + path + " is not a batch file");
    if (version != kVersion)
        throw std::runtime_error("batch_io: unsupported batch version in " + path);

    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    json header;
    try {
        header = json::parse(htext);
    } catch (const json::exception& e) {
        throw std::runtime_error("batch_io: corrupt header in " + path + ": " + e.what());
    }

    TrajectoryBatch batch;
    batch.n_exp = header.at("n_exp").get<long>();
    batch.n_detectors = header.at("n_detectors").get<int>();
    batch.n_bins = header.at("n_bins").get<int>();
    batch.bin_width = header.at("bin_width").get<double>();
    batch.substeps_per_bin = header.at("substeps_per_bin").get<int>();
    batch.seed = header.at("seed").get<std::uint64_t>();
    batch.fingerprint = header.value("fingerprint", "");
    if (batch.n_exp < 1 || batch.n_detectors < 1 || batch.n_bins < 1)
        throw std::runtime_error("batch_io: invalid shape in " + path);

    const std::size_t n =
        static_cast<std::size_t>(batch.n_exp) * batch.n_detectors * batch.n_bins;
    batch.values.resize(n);
    in.read(reinterpret_cast<char*>(batch.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        throw std::runtime_error("batch_io: truncated data in " + path);
    return batch;
}

} // namespace corrfit::batch_io
