#include "emw/manifest.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

#include "json.hpp"

namespace emw {

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("manifest: digest init failed");
    char buf[65536];
    while (f) {
        f.read(buf, sizeof buf);
        const std::streamsize got = f.gcount();
        if (got > 0 &&
            EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(got)) != 1)
            throw std::runtime_error("manifest: digest update failed");
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("manifest: digest final failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void RunManifest::add_artifact(const std::string& path) {
    artifacts.emplace_back(path, sha256_file(path));
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& [p, h] : manifest.artifacts)
        arts.push_back({{"path", p}, {"sha256", h}});
    nlohmann::json j{{"command", manifest.command},
                     {"args", manifest.args},
                     {"seed", manifest.seed},
                     {"artifacts", arts}};
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
}

}  // namespace emw
