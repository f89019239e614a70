#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "singulate/network.hpp"
#include "singulate/proposals_json.hpp"

namespace singulate {

inline constexpr std::int32_t dataset_version = 1;
inline constexpr char dataset_format_name[] = "singulate-dataset";

namespace detail {

inline constexpr std::size_t image_bytes =
    std::size_t(PushImage::size) * PushImage::size * sizeof(float);

inline nlohmann::json parse_dataset_header(const std::string& line) {
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("dataset meta line 1 is not valid JSON: ") + e.what());
    }
    if (header.value("kind", "") != "header" || header.value("format", "") != dataset_format_name)
        throw SchemaError("dataset meta line 1 is not a dataset header");
    if (header.value("version", -1) != dataset_version)
        throw SchemaError("unsupported dataset version " + header.value("version", nlohmann::json()).dump());
    if (header.value("image_size", -1) != PushImage::size)
        throw SchemaError("dataset image size disagrees with the encoder crop");
    return header;
}

}  // namespace detail

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<nlohmann::json> meta;  ///< per-sample audit meta, parallel to samples
};

/// Meta records go to <base>.ndjson, one per line after a header line; image
/// payloads go to <base>.blob as raw little-endian f32 rows located by the
/// byte offset stored in each record.
class DatasetWriter {
public:
    enum class Mode { create, append };

    explicit DatasetWriter(const std::string& base, Mode mode = Mode::create) : base_(base) {
        std::string meta_path = base + ".ndjson";
        std::string blob_path = base + ".blob";
        if (mode == Mode::append) {
            std::ifstream check(meta_path);
            if (!check) throw std::runtime_error("cannot open dataset meta: " + meta_path);
            std::string line;
            std::size_t lines = 0;
            while (std::getline(check, line)) {
                if (lines == 0) detail::parse_dataset_header(line);
                ++lines;
            }
            if (lines == 0) throw SchemaError("dataset meta has no header line: " + meta_path);
            count_ = lines - 1;

            std::ifstream sizer(blob_path, std::ios::binary | std::ios::ate);
            if (!sizer) throw std::runtime_error("cannot open dataset blob: " + blob_path);
            blob_end_ = std::uint64_t(sizer.tellg());
            if (blob_end_ != count_ * detail::image_bytes)
                throw SchemaError("dataset blob holds " + std::to_string(blob_end_) +
                                  " bytes, expected " +
                                  std::to_string(count_ * detail::image_bytes) + " for " +
                                  std::to_string(count_) + " samples");
        }

        auto flags = (mode == Mode::create) ? std::ios::trunc : std::ios::app;
        meta_.open(meta_path, flags);
        blob_.open(blob_path, flags | std::ios::binary);
        if (!meta_ || !blob_) throw std::runtime_error("cannot open dataset for writing: " + base);
        if (mode == Mode::create) {
            nlohmann::json header = {{"kind", "header"},
                                     {"format", dataset_format_name},
                                     {"version", dataset_version},
                                     {"image_size", PushImage::size}};
            meta_ << header.dump() << '\n';
            meta_.flush();
        }
    }

    void append(const LabeledSample& sample,
                const nlohmann::json& extra = nlohmann::json::object()) {
        if (sample.image.pixels.size() != std::size_t(PushImage::size) * PushImage::size)
            throw std::invalid_argument("dataset append: image is not " +
                                        std::to_string(PushImage::size) + "x" +
                                        std::to_string(PushImage::size));
        blob_.write(reinterpret_cast<const char*>(sample.image.pixels.data()),
                    std::streamsize(detail::image_bytes));
        nlohmann::json record = {{"kind", "sample"},
                                 {"offset", blob_end_},
                                 {"label", sample.label},
                                 {"trial", sample.trial},
                                 {"push", sample.push_index},
                                 {"policy", sample.policy},
                                 {"validation", sample.validation},
                                 {"proposal", to_json(sample.image.proposal)}};
        if (!extra.empty()) record["meta"] = extra;
        meta_ << record.dump() << '\n';
        blob_.flush();
        meta_.flush();
        if (!blob_ || !meta_)
            throw std::runtime_error("dataset write failed at record " + std::to_string(count_) +
                                     ": " + base_);
        blob_end_ += detail::image_bytes;
        ++count_;
    }

    std::size_t count() const { return count_; }

private:
    std::string base_;
    std::ofstream meta_;
    std::ofstream blob_;
    std::uint64_t blob_end_ = 0;
    std::size_t count_ = 0;
};

inline Dataset load_dataset(const std::string& base) {
    std::string meta_path = base + ".ndjson";
    std::string blob_path = base + ".blob";
    std::ifstream meta(meta_path);
    if (!meta) throw std::runtime_error("cannot open dataset meta: " + meta_path);
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw std::runtime_error("cannot open dataset blob: " + blob_path);

    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(meta, line)) {
        ++line_no;
        if (line_no == 1) {
            detail::parse_dataset_header(line);
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("dataset meta line " + std::to_string(line_no) +
                              " is not valid JSON: " + e.what());
        }
        try {
            if (record.at("kind").get<std::string>() != "sample")
                throw SchemaError("dataset meta line " + std::to_string(line_no) +
                                  " has unexpected kind");
            LabeledSample sample;
            sample.label = record.at("label").get<int>();
            sample.trial = record.at("trial").get<std::int64_t>();
            sample.push_index = record.at("push").get<std::int32_t>();
            sample.policy = record.at("policy").get<std::string>();
            sample.validation = record.at("validation").get<bool>();
            sample.image.proposal = proposal_from_json(record.at("proposal"));
            sample.image.pixels.resize(std::size_t(PushImage::size) * PushImage::size);

            auto offset = record.at("offset").get<std::uint64_t>();
            blob.seekg(std::streamoff(offset));
            blob.read(reinterpret_cast<char*>(sample.image.pixels.data()),
                      std::streamsize(detail::image_bytes));
            if (blob.gcount() != std::streamsize(detail::image_bytes))
                throw SchemaError("dataset blob ends inside the image at offset " +
                                  std::to_string(offset));
            blob.clear();

            out.samples.push_back(std::move(sample));
            out.meta.push_back(record.contains("meta") ? record.at("meta")
                                                       : nlohmann::json::object());
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("dataset meta line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (line_no == 0) throw SchemaError("dataset meta has no header line: " + meta_path);
    return out;
}

/// Concatenate datasets into a new one; samples keep order, offsets rebuilt.
inline void merge_datasets(const std::vector<std::string>& bases, const std::string& out_base) {
    DatasetWriter out(out_base);
    for (const std::string& base : bases) {
        Dataset ds = load_dataset(base);
        for (std::size_t i = 0; i < ds.samples.size(); ++i) out.append(ds.samples[i], ds.meta[i]);
    }
}

}  // namespace singulate
