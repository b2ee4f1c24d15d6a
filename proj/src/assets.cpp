// SPDX-License-Identifier: Apache-2.0
#include "vidqa/assets.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vidqa/errors.hpp"
#include "vidqa/image.hpp"

#ifndef VIDQA_DEFAULT_ASSET_DIR
#define VIDQA_DEFAULT_ASSET_DIR "assets"
#endif

namespace vidqa::assets {

std::string asset_dir() {
    if (const char* env = std::getenv("VIDQA_ASSET_DIR"); env && *env) {
        return env;
    }
    return VIDQA_DEFAULT_ASSET_DIR;
}

std::string load_asset(const std::string& name) {
    const std::string path = asset_dir() + "/" + name;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("asset not found: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string asset_digest(const std::string& name) {
    return fnv1a_hex(load_asset(name));
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        const size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        const size_t close = tmpl.find('}', open + 1);
        if (close == std::string::npos) {
            throw Error("unterminated placeholder in template");
        }
        const std::string key = tmpl.substr(open + 1, close - open - 1);
        const auto it = vars.find(key);
        if (it == vars.end()) {
            throw Error("unknown template placeholder: {" + key + "}");
        }
        // Substituted values are appended verbatim and never re-scanned, so
        // braces inside memory JSON or question text cannot trigger another
        // substitution.
        out += it->second;
        pos = close + 1;
    }
    return out;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

} // namespace vidqa::assets
