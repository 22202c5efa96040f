#pragma once

#include <stdexcept>
#include <string>

namespace hddp
{

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public std::runtime_error
{
   public:
    ParseError(const std::string& file, int line, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), file_(file), line_(line)
    {
    }
    const std::string& file() const { return file_; }
    int line() const { return line_; }

   private:
    std::string file_;
    int line_;
};

/// Kinematic tree is not a single rooted tree.
class TopologyError : public std::runtime_error
{
   public:
    using std::runtime_error::runtime_error;
};

/// A model field violates its invariant (named in the message).
class InvariantError : public std::runtime_error
{
   public:
    InvariantError(const std::string& field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(field)
    {
    }
    const std::string& field() const { return field_; }

   private:
    std::string field_;
};

/// Contact Jacobian stack is rank deficient.
class SingularityError : public std::runtime_error
{
   public:
    SingularityError(int rank, int rows)
        : std::runtime_error("contact Jacobian stack is rank deficient (rank " + std::to_string(rank) + " of " +
                             std::to_string(rows) + ")"),
          rank_(rank),
          rows_(rows)
    {
    }
    int rank() const { return rank_; }
    int rows() const { return rows_; }

   private:
    int rank_;
    int rows_;
};

/// Centre of pressure requested for an (almost) unloaded contact.
class UndefinedCopError : public std::runtime_error
{
   public:
    using std::runtime_error::runtime_error;
};

/// A trajectory was produced for a different model.
class HashMismatchError : public std::runtime_error
{
   public:
    HashMismatchError(const std::string& expected, const std::string& actual)
        : std::runtime_error("model hash mismatch: trajectory has " + expected + ", model gives " + actual)
    {
    }
};

class DimensionError : public std::invalid_argument
{
   public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace hddp
