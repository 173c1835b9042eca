// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pairwise_vl {

/// Root of every fault raised by the harness. Callers that only need to
/// distinguish "ours" from foreign exceptions catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for caller mistakes that the CLI maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// dataset-ingest

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& what)
      : Error("malformed record at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingImage : public Error {
 public:
  explicit MissingImage(std::string locator, const std::string& detail = {})
      : Error("missing image: " + locator + (detail.empty() ? "" : " (" + detail + ")")),
        locator_(std::move(locator)) {}
  const std::string& locator() const noexcept { return locator_; }

 private:
  std::string locator_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::int64_t id)
      : Error("duplicate pair id " + std::to_string(id)), id_(id) {}
  std::int64_t id() const noexcept { return id_; }

 private:
  std::int64_t id_;
};

// prompt-templates

class UnsupportedProbe : public UsageError {
 public:
  using UsageError::UsageError;
};

class EmptyDescription : public Error {
 public:
  EmptyDescription() : Error("second-turn description is empty") {}
};

// llm-gateway

class AuthError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class RateLimitExhausted : public TransportError {
 public:
  using TransportError::TransportError;
};

class BadResponse : public Error {
 public:
  using Error::Error;
};

class ScriptMiss : public Error {
 public:
  explicit ScriptMiss(const std::string& key) : Error("no scripted response for " + key) {}
};

// answer-parser

class MalformedCorpus : public Error {
 public:
  using Error::Error;
};

// scoring

class IncompleteProbeSet : public Error {
 public:
  explicit IncompleteProbeSet(std::int64_t pair_id, const std::string& detail = {})
      : Error("incomplete probe set for pair " + std::to_string(pair_id) +
              (detail.empty() ? "" : ": " + detail)),
        pair_id_(pair_id) {}
  std::int64_t pair_id() const noexcept { return pair_id_; }

 private:
  std::int64_t pair_id_;
};

// pipeline-runner

class InvalidSetting : public UsageError {
 public:
  using UsageError::UsageError;
};

class ManifestMismatch : public Error {
 public:
  using Error::Error;
};

// analysis-report

class MissingSummary : public Error {
 public:
  using Error::Error;
};

class NoTags : public Error {
 public:
  using Error::Error;
};

class DatasetMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace pairwise_vl
