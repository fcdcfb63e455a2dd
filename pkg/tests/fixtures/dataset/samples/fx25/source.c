int parse_len(unsigned char *pkt)
{
    unsigned char body[16];
    int len = pkt[0];
    int i;
    for (i = 0; i < len; i++)
        body[i] = pkt[i + 1];
    return body[0];
}
