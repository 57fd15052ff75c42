"""Hand-enumerated golden corpus.

Each entry: SMILES, heavy-atom count, bond count, sum of nominal masses over
heavy atoms, number of rings in a minimum cycle basis (bonds - atoms + 1).
Counts were worked out by hand from the molecular formulas.
"""

GOLDEN = [
    # smiles,                                  atoms, bonds, mass, rings
    ("C",                                          1,  0,  12, 0),  # methane
    ("CC",                                         2,  1,  24, 0),  # ethane
    ("CCO",                                        3,  2,  40, 0),  # ethanol C2 O
    ("Ic1ccccc1",                                  7,  7, 199, 1),  # iodobenzene C6 I
    ("c1ccccc1",                                   6,  6,  72, 1),  # benzene
    ("OB(O)c1ccccc1",                              9,  9, 115, 1),  # phenylboronic acid C6 B O2
    ("c1ccc2ccccc2c1",                            10, 11, 120, 2),  # naphthalene C10
    ("c1ccc2cc3ccccc3cc2c1",                      14, 16, 168, 3),  # anthracene C14
    ("C1CC2CCC1C2",                                7,  8,  84, 2),  # norbornane C7
    ("C1CCC2(CC1)CCCC2",                          10, 11, 120, 2),  # spiro[4.5]decane C10
    ("CC(=O)Oc1ccccc1C(=O)O",                     13, 13, 172, 1),  # aspirin C9 O4
    ("CC(C)Cc1ccc(cc1)C(C)C(=O)O",                15, 15, 188, 1),  # ibuprofen C13 O2
    ("Cn1cnc2c1c(=O)n(C)c(=O)n2C",                14, 15, 184, 2),  # caffeine C8 N4 O2
    ("CS(=O)(=O)C",                                5,  4,  88, 0),  # dimethyl sulfone C2 S O2
    ("C#CC#N",                                     4,  3,  50, 0),  # cyanoacetylene C3 N
    ("c1ccc2[nH]ccc2c1",                           9, 10, 110, 2),  # indole C8 N
    ("C1C2CC3CC1CC(C2)C3",                        10, 12, 120, 3),  # adamantane C10
    ("c1ccc(cc1)-c1ccccc1",                       12, 13, 144, 2),  # biphenyl C12
    ("OC(=O)C(Cl)(Cl)Cl",                          7,  6, 161, 0),  # trichloroacetic acid C2 O2 Cl3
    ("C1=CC2=CC=CC3=C2C(=C1)C=C3",                12, 14, 144, 3),  # acenaphthylene C12
    ("OP(=O)(O)O",                                 5,  4,  95, 0),  # phosphoric acid P O4
    ("CCCCCCCCCCCCCCCC(=O)O",                     18, 17, 224, 0),  # palmitic acid C16 O2
    ("c1ccc2c(c1)ccc1ccccc12",                    14, 16, 168, 3),  # phenanthrene C14
    ("FC(F)(F)c1ccc(Br)cc1",                      11, 11, 221, 1),  # 4-bromobenzotrifluoride C7 F3 Br
    ("O=C1NC(=O)NC(=O)C1(CC)c1ccccc1",            17, 18, 220, 2),  # phenobarbital C12 N2 O3
]

GOLDEN_SMILES = [row[0] for row in GOLDEN]
