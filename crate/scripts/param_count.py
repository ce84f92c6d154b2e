#!/usr/bin/env python3
"""Trainable parameter counts from layer shapes, embedding table excluded.

Usage: param_count.py [--dim D] [--cnn-classes C] [--bilstm-classes C]
Prints one `name count` line per model.
"""
import argparse


def dense(n_in, n_out):
    return n_in * n_out + n_out


def conv1d(channels_in, filters, kernel):
    return kernel * channels_in * filters + filters


def lstm(n_in, units):
    # four gates, each with input weights, recurrent weights and a bias
    return 4 * (units * n_in + units * units + units)


def cnn(dim, classes):
    return (
        conv1d(dim, 300, 5)
        + conv1d(300, 300, 4)
        + dense(300, 300)
        + dense(300, classes)
    )


def bilstm(dim, classes):
    first = 2 * lstm(dim, 300)
    second = 2 * lstm(2 * 300, 150)
    return first + second + dense(2 * 150, 150) + dense(150, classes)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--cnn-classes", type=int, default=12)
    p.add_argument("--bilstm-classes", type=int, default=2)
    a = p.parse_args()
    print("cnn", cnn(a.dim, a.cnn_classes))
    print("bilstm", bilstm(a.dim, a.bilstm_classes))


if __name__ == "__main__":
    main()
