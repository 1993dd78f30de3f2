"""Regenerates the FCIDUMP and geometry fixtures used by the test suite.

Integrals are expressed in the Loewdin-orthogonalized STO-3G atomic basis so
that each orbital stays attached to one hydrogen atom. The 6x6 hydrogen sheet
fixtures hold only the exchange matrix (uv|uv) in Boys-localized STO-6G
orbitals, at a compressed (1.0 A) and an extended (2.0 A) lattice constant.
Requires pyscf.
"""
import os

import numpy as np
from pyscf import ao2mo, gto, lo
from pyscf.tools import fcidump

HERE = os.path.dirname(os.path.abspath(__file__))


def hydrogen_chain(n, d):
    return [("H", (0.0, 0.0, i * d)) for i in range(n)]


def write(name, atoms):
    mol = gto.M(atom=atoms, basis="sto-3g", unit="Angstrom", spin=0, verbose=0)
    c = lo.orth_ao(mol, "lowdin")
    h1 = c.T @ mol.intor("int1e_kin") @ c + c.T @ mol.intor("int1e_nuc") @ c
    eri = ao2mo.kernel(mol, c, compact=False).reshape([c.shape[1]] * 4)
    fcidump.from_integrals(
        os.path.join(HERE, name + ".fcidump"),
        h1,
        ao2mo.restore(8, eri, c.shape[1]),
        c.shape[1],
        mol.nelectron,
        nuc=mol.energy_nuc(),
        ms=0,
        tol=0.0,
        float_format=" %.16e",
    )
    with open(os.path.join(HERE, name + ".xyz"), "w") as f:
        for i, (_, (x, y, z)) in enumerate(atoms):
            f.write(f"{i} {x:.10f} {y:.10f} {z:.10f}\n")


def write_exchange(name, d, n=6):
    """Exchange matrix (uv|uv) of an n x n hydrogen sheet in Boys orbitals."""
    atoms = [("H", (x * d, y * d, 0.0)) for y in range(n) for x in range(n)]
    mol = gto.M(atom=atoms, basis="sto-6g", unit="Angstrom", spin=0, verbose=0)
    c = lo.Boys(mol, lo.orth_ao(mol, "lowdin")).kernel()
    # order the localized orbitals by the atom they sit on
    r = mol.atom_coords()
    centres = np.einsum("xij,ik,jk->kx", mol.intor("int1e_r"), c, c)
    order = [int(np.argmin(np.linalg.norm(r - centres[k], axis=1))) for k in range(n * n)]
    c = c[:, np.argsort(order)]
    eri = ao2mo.kernel(mol, c, compact=False).reshape([n * n] * 4)
    k = np.einsum("ijij->ij", eri)
    np.savetxt(os.path.join(HERE, name + ".txt"), k, fmt="%.12e")
    with open(os.path.join(HERE, name + ".xyz"), "w") as f:
        for i, (_, (x, y, z)) in enumerate(atoms):
            f.write(f"{i} {x:.10f} {y:.10f} {z:.10f}\n")


if __name__ == "__main__":
    write("h2_stretched", hydrogen_chain(2, 4.0))
    write("h4_chain", hydrogen_chain(4, 1.0))
    write("h6_chain", hydrogen_chain(6, 1.8))
    write_exchange("h36_sheet_exchange", 1.0)
    write_exchange("h36_sheet_exchange_extended", 2.0)
