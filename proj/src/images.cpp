#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "qrelex/dataset.hpp"

namespace qrelex {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path, const std::string& uri) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("unreachable image URI: " + uri);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

// Re-encode at reduced resolution until the payload fits the byte budget.
std::vector<unsigned char> downscale_to_fit(std::vector<unsigned char> bytes,
                                            const ImageRef& ref, std::size_t max_bytes) {
    cv::Mat img = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot decode image: " + ref.uri);
    const std::string ext = ref.media_type == MediaType::png ? ".png" : ".jpg";
    for (int pass = 0; pass < 10; ++pass) {
        double factor = std::sqrt(static_cast<double>(max_bytes) / bytes.size()) * 0.95;
        int w = std::max(1, static_cast<int>(img.cols * factor));
        int h = std::max(1, static_cast<int>(img.rows * factor));
        if (w < 8 || h < 8) break;
        cv::Mat smaller;
        cv::resize(img, smaller, cv::Size(w, h), 0, 0, cv::INTER_AREA);
        img = smaller;
        std::vector<unsigned char> encoded;
        if (!cv::imencode(ext, img, encoded))
            throw std::runtime_error("cannot re-encode image: " + ref.uri);
        bytes = std::move(encoded);
        if (bytes.size() <= max_bytes) return bytes;
    }
    throw std::runtime_error("image cannot be downscaled under the byte budget: " + ref.uri);
}

}  // namespace

LoadedImage load_image(const ImageRef& ref, const ImageLoadOptions& opts) {
    if (ref.uri.rfind("http://", 0) == 0 || ref.uri.rfind("https://", 0) == 0)
        throw std::runtime_error("unreachable image URI (remote fetch not supported): " + ref.uri);
    std::filesystem::path path(ref.uri);
    if (path.is_relative()) path = opts.base_dir / path;

    LoadedImage loaded{ref, read_bytes(path, ref.uri)};
    if (opts.max_bytes > 0 && loaded.bytes.size() > opts.max_bytes) {
        if (opts.policy == OversizePolicy::reject)
            throw std::runtime_error("image exceeds byte budget (" +
                                     std::to_string(loaded.bytes.size()) + " > " +
                                     std::to_string(opts.max_bytes) + "): " + ref.uri);
        loaded.bytes = downscale_to_fit(std::move(loaded.bytes), ref, opts.max_bytes);
    }
    return loaded;
}

namespace {

std::vector<LoadedImage> load_all(const std::vector<ImageRef>& refs, const ImageLoadOptions& opts) {
    std::vector<LoadedImage> out;
    out.reserve(refs.size());
    for (const ImageRef& ref : refs) out.push_back(load_image(ref, opts));
    return out;
}

}  // namespace

std::vector<LoadedImage> resolve_images(const Document& doc, const ImageLoadOptions& opts) {
    return load_all(doc.images, opts);
}

std::vector<LoadedImage> resolve_images(const Topic& topic, const ImageLoadOptions& opts) {
    return load_all(topic.images, opts);
}

}  // namespace qrelex
