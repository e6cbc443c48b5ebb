#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ewcdr/dataset.hpp"
#include "ewcdr/errors.hpp"

namespace ewcdr {

namespace detail {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

inline std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path,
                               std::size_t offset, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw format_error(path.string() + ": truncated while reading " + std::string(what) +
                           " at byte offset " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

// Reads an image/label file pair in the classic big-endian IDX layout
// (magic 0x00000803 for u8 image tensors, 0x00000801 for u8 labels).
// Pixels land in [0,255], or [0,1] when normalize is set. Malformed input
// reports the byte offset at which parsing failed.
inline LabeledDataset load_idx(const std::filesystem::path& images_path,
                               const std::filesystem::path& labels_path, bool normalize) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw io_error("cannot open " + images_path.string());
    const std::uint32_t img_magic = detail::read_be32(img, images_path, 0, "magic");
    if (img_magic != detail::kIdxImageMagic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", img_magic);
        throw format_error(images_path.string() + ": bad image magic " + hex +
                           " at byte offset 0");
    }
    const std::uint32_t count = detail::read_be32(img, images_path, 4, "image count");
    const std::uint32_t rows = detail::read_be32(img, images_path, 8, "row count");
    const std::uint32_t cols = detail::read_be32(img, images_path, 12, "column count");
    const std::size_t pixels = std::size_t(rows) * cols;
    std::vector<unsigned char> buf(pixels);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw io_error("cannot open " + labels_path.string());
    const std::uint32_t lab_magic = detail::read_be32(lab, labels_path, 0, "magic");
    if (lab_magic != detail::kIdxLabelMagic) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", lab_magic);
        throw format_error(labels_path.string() + ": bad label magic " + hex +
                           " at byte offset 0");
    }
    const std::uint32_t lab_count = detail::read_be32(lab, labels_path, 4, "label count");
    if (lab_count != count)
        throw format_error(labels_path.string() + ": holds " + std::to_string(lab_count) +
                           " labels but " + images_path.string() + " holds " +
                           std::to_string(count) + " images");

    LabeledDataset out;
    out.feature_dim = pixels;
    out.samples.reserve(count);
    std::size_t max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (img.gcount() != static_cast<std::streamsize>(pixels))
            throw format_error(images_path.string() + ": truncated in image " +
                               std::to_string(i) + " at byte offset " +
                               std::to_string(16 + std::size_t(i) * pixels +
                                              static_cast<std::size_t>(img.gcount())));
        char lc;
        if (!lab.get(lc))
            throw format_error(labels_path.string() + ": truncated in label " +
                               std::to_string(i) + " at byte offset " + std::to_string(8 + i));
        Sample s;
        s.features = Tensor1(pixels);
        const double scale = normalize ? 1.0 / 255.0 : 1.0;
        for (std::size_t p = 0; p < pixels; ++p) s.features[p] = scale * double(buf[p]);
        s.label = static_cast<unsigned char>(lc);
        if (s.label > max_label) max_label = s.label;
        out.samples.push_back(std::move(s));
    }
    out.num_classes = count == 0 ? 0 : max_label + 1;
    return out;
}

// Counterpart writer, mainly so tests and small experiments can produce
// fixture files. `pixels` is count*rows*cols bytes, row-major per image.
inline void save_idx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path,
                     const std::vector<unsigned char>& pixels, std::size_t count,
                     std::size_t rows, std::size_t cols,
                     const std::vector<unsigned char>& labels) {
    if (pixels.size() != count * rows * cols)
        throw validation_error("save_idx: pixel buffer does not match count*rows*cols");
    if (labels.size() != count)
        throw validation_error("save_idx: label count does not match image count");
    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    if (!img) throw io_error("cannot open " + images_path.string() + " for writing");
    detail::write_be32(img, detail::kIdxImageMagic);
    detail::write_be32(img, static_cast<std::uint32_t>(count));
    detail::write_be32(img, static_cast<std::uint32_t>(rows));
    detail::write_be32(img, static_cast<std::uint32_t>(cols));
    img.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!img) throw io_error("write failed for " + images_path.string());

    std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
    if (!lab) throw io_error("cannot open " + labels_path.string() + " for writing");
    detail::write_be32(lab, detail::kIdxLabelMagic);
    detail::write_be32(lab, static_cast<std::uint32_t>(count));
    lab.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!lab) throw io_error("write failed for " + labels_path.string());
}

}  // namespace ewcdr
